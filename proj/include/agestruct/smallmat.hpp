#pragma once

#include <array>
#include <cmath>
#include <span>
#include <stdexcept>

namespace agestruct {

/// Dense row-major n x n matrix with n <= 3. Enough linear algebra for the
/// vector-valued age model: products, small solves, and a positivity-friendly
/// matrix exponential.
struct SmallMat {
    int n = 1;
    std::array<double, 9> a{};

    explicit SmallMat(int dim = 1) : n(dim)
    {
        if (dim < 1 || dim > 3) throw std::invalid_argument("SmallMat: dim must be 1..3");
    }

    double& operator()(int r, int c) { return a[static_cast<size_t>(r) * n + c]; }
    double operator()(int r, int c) const { return a[static_cast<size_t>(r) * n + c]; }

    static SmallMat identity(int dim)
    {
        SmallMat m(dim);
        for (int i = 0; i < dim; ++i) m(i, i) = 1.0;
        return m;
    }

    static SmallMat diagonal(int dim, double value)
    {
        SmallMat m(dim);
        for (int i = 0; i < dim; ++i) m(i, i) = value;
        return m;
    }

    bool is_diagonal(double tol = 0.0) const
    {
        for (int r = 0; r < n; ++r)
            for (int c = 0; c < n; ++c)
                if (r != c && std::abs((*this)(r, c)) > tol) return false;
        return true;
    }

    double max_abs() const
    {
        double m = 0.0;
        for (int r = 0; r < n; ++r)
            for (int c = 0; c < n; ++c) m = std::max(m, std::abs((*this)(r, c)));
        return m;
    }
};

SmallMat operator*(const SmallMat& x, const SmallMat& y);
SmallMat operator+(const SmallMat& x, const SmallMat& y);
SmallMat operator*(double s, const SmallMat& x);

void matvec(const SmallMat& m, std::span<const double> x, std::span<double> out);

/// Solve m * x = b in place (b becomes x). Returns false when the pivot
/// drops below 1e-12 times the matrix scale.
bool solve_inplace(SmallMat m, std::span<double> b);

/// Matrix exponential by scaling and squaring with a (1,1) Pade step.
/// Preserves entrywise nonnegativity for Metzler arguments.
SmallMat expm(const SmallMat& x);

} // namespace agestruct
