#include "agestruct/smallmat.hpp"

#include <algorithm>
#include <cmath>

namespace agestruct {

SmallMat operator*(const SmallMat& x, const SmallMat& y)
{
    SmallMat out(x.n);
    for (int r = 0; r < x.n; ++r) {
        for (int c = 0; c < x.n; ++c) {
            double acc = 0.0;
            for (int k = 0; k < x.n; ++k) acc += x(r, k) * y(k, c);
            out(r, c) = acc;
        }
    }
    return out;
}

SmallMat operator+(const SmallMat& x, const SmallMat& y)
{
    SmallMat out(x.n);
    for (int r = 0; r < x.n; ++r)
        for (int c = 0; c < x.n; ++c) out(r, c) = x(r, c) + y(r, c);
    return out;
}

SmallMat operator*(double s, const SmallMat& x)
{
    SmallMat out(x.n);
    for (int r = 0; r < x.n; ++r)
        for (int c = 0; c < x.n; ++c) out(r, c) = s * x(r, c);
    return out;
}

void matvec(const SmallMat& m, std::span<const double> x, std::span<double> out)
{
    for (int r = 0; r < m.n; ++r) {
        double acc = 0.0;
        for (int c = 0; c < m.n; ++c) acc += m(r, c) * x[c];
        out[r] = acc;
    }
}

bool solve_inplace(SmallMat m, std::span<double> b)
{
    const int n = m.n;
    const double floor = 1e-12 * std::max(1.0, m.max_abs());
    std::array<int, 3> perm{0, 1, 2};
    for (int col = 0; col < n; ++col) {
        int pivot = col;
        for (int r = col + 1; r < n; ++r) {
            if (std::abs(m(perm[r], col)) > std::abs(m(perm[pivot], col))) pivot = r;
        }
        std::swap(perm[col], perm[pivot]);
        const double p = m(perm[col], col);
        if (std::abs(p) < floor) return false;
        for (int r = col + 1; r < n; ++r) {
            const double f = m(perm[r], col) / p;
            for (int c = col; c < n; ++c) m(perm[r], c) -= f * m(perm[col], c);
            b[perm[r]] -= f * b[perm[col]];
        }
    }
    std::array<double, 3> x{};
    for (int col = n - 1; col >= 0; --col) {
        double acc = b[perm[col]];
        for (int c = col + 1; c < n; ++c) acc -= m(perm[col], c) * x[c];
        x[col] = acc / m(perm[col], col);
    }
    for (int c = 0; c < n; ++c) b[c] = x[c];
    return true;
}

SmallMat expm(const SmallMat& x)
{
    if (x.n == 1) {
        SmallMat out(1);
        out(0, 0) = std::exp(x(0, 0));
        return out;
    }
    if (x.is_diagonal()) {
        SmallMat out(x.n);
        for (int i = 0; i < x.n; ++i) out(i, i) = std::exp(x(i, i));
        return out;
    }
    // scale deep enough that the (1,1) Pade step's cubic error stays near
    // rounding after squaring back; nonnegativity survives the squarings
    int squarings = 0;
    double norm = x.max_abs();
    while (norm > 0x1.0p-16 && squarings < 64) {
        norm *= 0.5;
        ++squarings;
    }
    const double scale = std::ldexp(1.0, -squarings);
    const SmallMat h = scale * x;
    SmallMat num = SmallMat::identity(x.n) + 0.5 * h;
    SmallMat den = SmallMat::identity(x.n) + (-0.5) * h;
    // columns of den^{-1} * num
    SmallMat out(x.n);
    for (int c = 0; c < x.n; ++c) {
        std::array<double, 3> col{};
        for (int r = 0; r < x.n; ++r) col[r] = num(r, c);
        if (!solve_inplace(den, std::span<double>(col.data(), x.n))) {
            throw std::runtime_error("expm: Pade denominator is singular");
        }
        for (int r = 0; r < x.n; ++r) out(r, c) = col[r];
    }
    for (int s = 0; s < squarings; ++s) out = out * out;
    return out;
}

} // namespace agestruct
