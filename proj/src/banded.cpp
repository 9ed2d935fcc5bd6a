#include "kpo/banded.hpp"

#include "kpo/error.hpp"

#include <algorithm>

namespace kpo {

std::pair<int, int> BandedOperator::range(int dim, int offset) {
    return {std::max(0, -offset), std::min(dim, dim - offset)};
}

Band& BandedOperator::band(int offset) {
    for (Band& b : bands_) {
        if (b.offset == offset) return b;
    }
    bands_.push_back({offset, Vector::Zero(dim_)});
    return bands_.back();
}

void BandedOperator::zero() {
    for (Band& b : bands_) b.coeff.setZero();
}

BandedOperator BandedOperator::from_sparse(const SparseMatrix& m) {
    if (m.rows() != m.cols()) throw Error(ErrorCode::invalid_space, "banded operator must be square");
    BandedOperator out(static_cast<int>(m.rows()));
    for (int col = 0; col < m.outerSize(); ++col) {
        for (SparseMatrix::InnerIterator it(m, col); it; ++it) {
            if (it.value() == Complex(0.0)) continue;
            const int row = static_cast<int>(it.row());
            out.band(col - row).coeff(row) += it.value();
        }
    }
    std::sort(out.bands_.begin(), out.bands_.end(), [](const Band& a, const Band& b) { return a.offset < b.offset; });
    return out;
}

void BandedOperator::add_left(const Matrix& rho, Complex scale, Matrix& out) const {
    const Eigen::Index n = rho.rows();
    for (const Band& b : bands_) {
        const auto [first, last] = range(dim_, b.offset);
        if (last <= first) continue;
        const Vector sc = scale * b.coeff;
        for (Eigen::Index j = 0; j < n; ++j) {
            const Complex* src = rho.col(j).data() + b.offset;
            Complex* dst = out.col(j).data();
            for (int i = first; i < last; ++i) dst[i] += sc(i) * src[i];
        }
    }
}

void BandedOperator::add_right_adjoint(const Matrix& rho, Complex scale, Matrix& out) const {
    const Eigen::Index n = rho.rows();
    for (const Band& b : bands_) {
        const auto [first, last] = range(dim_, b.offset);
        for (int j = first; j < last; ++j) {
            const Complex w = scale * std::conj(b.coeff(j));
            const Complex* src = rho.col(j + b.offset).data();
            Complex* dst = out.col(j).data();
            for (Eigen::Index i = 0; i < n; ++i) dst[i] += w * src[i];
        }
    }
}

void add_sandwich(const Band& l, int dim, const Matrix& rho, double rate, Matrix& out) {
    const auto [first, last] = BandedOperator::range(dim, l.offset);
    for (int j = first; j < last; ++j) {
        const Complex w = rate * std::conj(l.coeff(j));
        const Complex* src = rho.col(j + l.offset).data() + l.offset;
        Complex* dst = out.col(j).data();
        for (int i = first; i < last; ++i) dst[i] += (l.coeff(i) * w) * src[i];
    }
}

} // namespace kpo
