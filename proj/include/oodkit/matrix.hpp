#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

namespace oodkit {

// Dense row-major matrix of doubles. The workhorse container for batches,
// weights and covariance blocks.
struct RealMatrix {
    std::size_t rows = 0;
    std::size_t cols = 0;
    std::vector<double> data;

    RealMatrix() = default;
    RealMatrix(std::size_t r, std::size_t c, double fill = 0.0)
        : rows(r), cols(c), data(r * c, fill) {}

    double& operator()(std::size_t i, std::size_t j) { return data[i * cols + j]; }
    double operator()(std::size_t i, std::size_t j) const { return data[i * cols + j]; }

    std::span<double> row(std::size_t i) { return {data.data() + i * cols, cols}; }
    std::span<const double> row(std::size_t i) const { return {data.data() + i * cols, cols}; }

    bool empty() const { return rows == 0 || cols == 0; }
    bool same_shape(const RealMatrix& other) const {
        return rows == other.rows && cols == other.cols;
    }
    bool all_finite() const;
};

// a (n x k) * b (k x m) -> n x m
RealMatrix matmul(const RealMatrix& a, const RealMatrix& b);
// a^T (k x n)^T * b (k x m) -> n x m, i.e. matmul(transpose(a), b) without the copy
RealMatrix matmul_at_b(const RealMatrix& a, const RealMatrix& b);
// a (n x k) * b^T (m x k)^T -> n x m
RealMatrix matmul_a_bt(const RealMatrix& a, const RealMatrix& b);

RealMatrix transpose(const RealMatrix& a);

// adds v to every row of a in place; v.size() must equal a.cols
void add_row_inplace(RealMatrix& a, std::span<const double> v);
std::vector<double> column_sums(const RealMatrix& a);

void axpy_inplace(RealMatrix& y, double alpha, const RealMatrix& x);  // y += alpha * x
void scale_inplace(RealMatrix& a, double alpha);

double dot(std::span<const double> a, std::span<const double> b);
double norm2(std::span<const double> a);

std::string shape_string(const RealMatrix& a);

}  // namespace oodkit
