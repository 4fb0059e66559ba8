#include "oodkit/matrix.hpp"

#include <cmath>
#include <cstddef>

#include "oodkit/errors.hpp"

namespace oodkit {

bool RealMatrix::all_finite() const {
    for (double v : data) {
        if (!std::isfinite(v)) return false;
    }
    return true;
}

static void check_inner(std::size_t a, std::size_t b, const char* what) {
    if (a != b) {
        throw ConfigError(std::string("matrix dimension mismatch in ") + what + ": " +
                          std::to_string(a) + " vs " + std::to_string(b));
    }
}

RealMatrix matmul(const RealMatrix& a, const RealMatrix& b) {
    check_inner(a.cols, b.rows, "matmul");
    RealMatrix out(a.rows, b.cols, 0.0);
    // i-k-j order keeps the inner loop contiguous in both b and out
    for (std::size_t i = 0; i < a.rows; ++i) {
        const double* arow = a.data.data() + i * a.cols;
        double* orow = out.data.data() + i * out.cols;
        for (std::size_t k = 0; k < a.cols; ++k) {
            const double aik = arow[k];
            if (aik == 0.0) continue;
            const double* brow = b.data.data() + k * b.cols;
            for (std::size_t j = 0; j < b.cols; ++j) {
                orow[j] += aik * brow[j];
            }
        }
    }
    return out;
}

RealMatrix matmul_at_b(const RealMatrix& a, const RealMatrix& b) {
    check_inner(a.rows, b.rows, "matmul_at_b");
    RealMatrix out(a.cols, b.cols, 0.0);
    for (std::size_t k = 0; k < a.rows; ++k) {
        const double* arow = a.data.data() + k * a.cols;
        const double* brow = b.data.data() + k * b.cols;
        for (std::size_t i = 0; i < a.cols; ++i) {
            const double aki = arow[i];
            if (aki == 0.0) continue;
            double* orow = out.data.data() + i * out.cols;
            for (std::size_t j = 0; j < b.cols; ++j) {
                orow[j] += aki * brow[j];
            }
        }
    }
    return out;
}

RealMatrix matmul_a_bt(const RealMatrix& a, const RealMatrix& b) {
    check_inner(a.cols, b.cols, "matmul_a_bt");
    RealMatrix out(a.rows, b.rows, 0.0);
    for (std::size_t i = 0; i < a.rows; ++i) {
        const double* arow = a.data.data() + i * a.cols;
        double* orow = out.data.data() + i * out.cols;
        for (std::size_t j = 0; j < b.rows; ++j) {
            const double* brow = b.data.data() + j * b.cols;
            double acc = 0.0;
            for (std::size_t k = 0; k < a.cols; ++k) acc += arow[k] * brow[k];
            orow[j] = acc;
        }
    }
    return out;
}

RealMatrix transpose(const RealMatrix& a) {
    RealMatrix out(a.cols, a.rows);
    for (std::size_t i = 0; i < a.rows; ++i) {
        for (std::size_t j = 0; j < a.cols; ++j) {
            out(j, i) = a(i, j);
        }
    }
    return out;
}

void add_row_inplace(RealMatrix& a, std::span<const double> v) {
    check_inner(a.cols, v.size(), "add_row_inplace");
    for (std::size_t i = 0; i < a.rows; ++i) {
        double* row = a.data.data() + i * a.cols;
        for (std::size_t j = 0; j < a.cols; ++j) row[j] += v[j];
    }
}

std::vector<double> column_sums(const RealMatrix& a) {
    std::vector<double> out(a.cols, 0.0);
    for (std::size_t i = 0; i < a.rows; ++i) {
        const double* row = a.data.data() + i * a.cols;
        for (std::size_t j = 0; j < a.cols; ++j) out[j] += row[j];
    }
    return out;
}

void axpy_inplace(RealMatrix& y, double alpha, const RealMatrix& x) {
    check_inner(y.data.size(), x.data.size(), "axpy_inplace");
    for (std::size_t i = 0; i < y.data.size(); ++i) y.data[i] += alpha * x.data[i];
}

void scale_inplace(RealMatrix& a, double alpha) {
    for (double& v : a.data) v *= alpha;
}

double dot(std::span<const double> a, std::span<const double> b) {
    double acc = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) acc += a[i] * b[i];
    return acc;
}

double norm2(std::span<const double> a) {
    return std::sqrt(dot(a, a));
}

std::string shape_string(const RealMatrix& a) {
    return std::to_string(a.rows) + "x" + std::to_string(a.cols);
}

}  // namespace oodkit
