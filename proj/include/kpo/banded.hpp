#pragma once

// Banded operators on the truncated Fock space. Every operator the
// integrators need (a, a^2, H, H_eff) has at most five diagonals, so
// products with dense density matrices are O(bands * dim^2).

#include "kpo/fock.hpp"

#include <vector>

namespace kpo {

/// X(i, i + offset) = coeff(i).
struct Band {
    int offset = 0;
    Vector coeff;
};

class BandedOperator {
public:
    BandedOperator() = default;
    explicit BandedOperator(int dim) : dim_(dim) {}

    static BandedOperator from_sparse(const SparseMatrix& m);

    int dim() const { return dim_; }
    const std::vector<Band>& bands() const { return bands_; }

    /// Adds `coeff` to the diagonal with the given offset (creating it if needed).
    Band& band(int offset);
    /// Zeroes every coefficient, keeping the band layout.
    void zero();

    /// out += scale * X rho
    void add_left(const Matrix& rho, Complex scale, Matrix& out) const;
    /// out += scale * rho X^dag
    void add_right_adjoint(const Matrix& rho, Complex scale, Matrix& out) const;

    /// Valid index range [first, last) of a band.
    static std::pair<int, int> range(int dim, int offset);

private:
    int dim_ = 0;
    std::vector<Band> bands_;
};

/// out += rate * L rho L^dag for a single-band L = c(i) |i><i+offset|.
void add_sandwich(const Band& l, int dim, const Matrix& rho, double rate, Matrix& out);

} // namespace kpo
