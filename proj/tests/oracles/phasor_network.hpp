#pragma once

// Test-only frequency-domain oracle: complex nodal analysis at one frequency.
// Shares nothing with the time-domain solver; elements are stamped from their
// physical parameters directly.

#include <Eigen/Dense>

#include <complex>
#include <numbers>
#include <vector>

namespace oracle {

using cplx = std::complex<double>;

class PhasorNetwork {
public:
    explicit PhasorNetwork(int nodes) : y_(Eigen::MatrixXcd::Zero(nodes, nodes)), j_(Eigen::VectorXcd::Zero(nodes)) {}

    // Branch with port admittance matrix yb between node vectors a -> b (-1 = ground).
    void branch(const std::vector<int>& a, const std::vector<int>& b, const Eigen::MatrixXcd& yb) {
        const auto k = a.size();
        for (std::size_t p = 0; p < k; ++p)
            for (std::size_t q = 0; q < k; ++q) {
                add(a[p], a[q], yb(p, q));
                add(b[p], b[q], yb(p, q));
                add(a[p], b[q], -yb(p, q));
                add(b[p], a[q], -yb(p, q));
            }
    }

    void shunt(const std::vector<int>& a, const Eigen::MatrixXcd& yb) {
        branch(a, std::vector<int>(a.size(), -1), yb);
    }

    // EMF vector e (rms phasors) behind impedance z from ground into nodes a.
    void source(const std::vector<int>& a, const Eigen::VectorXcd& e, const Eigen::MatrixXcd& z) {
        const Eigen::MatrixXcd yb = z.inverse();
        shunt(a, yb);
        const Eigen::VectorXcd norton = yb * e;
        for (std::size_t p = 0; p < a.size(); ++p)
            if (a[p] >= 0) j_(a[p]) += norton(p);
    }

    // Single-phase unit, leakage z on winding 1, turns ratio n = N1/N2.
    void transformer(int p1, int p2, int s1, int s2, double n, cplx z) {
        const int t[4] = {p1, p2, s1, s2};
        const double c[4] = {1.0, -1.0, -n, n};
        for (int r = 0; r < 4; ++r)
            for (int s = 0; s < 4; ++s) add(t[r], t[s], c[r] * c[s] / z);
    }

    Eigen::VectorXcd solve() const { return y_.fullPivLu().solve(j_); }

private:
    void add(int r, int c, cplx v) {
        if (r >= 0 && c >= 0) y_(r, c) += v;
    }
    Eigen::MatrixXcd y_;
    Eigen::VectorXcd j_;
};

inline Eigen::Matrix3cd balanced(cplx self, cplx mutual) {
    Eigen::Matrix3cd m = Eigen::Matrix3cd::Constant(mutual);
    m.diagonal().setConstant(self);
    return m;
}

// Phase matrix with sequence values (x0, x1).
inline Eigen::Matrix3cd from_sequence(cplx x0, cplx x1) { return balanced((x0 + 2.0 * x1) / 3.0, (x0 - x1) / 3.0); }

inline Eigen::Vector3cd balanced_set(cplx phase_a) {
    const cplx a = std::polar(1.0, 2.0 * std::numbers::pi / 3.0);
    return {phase_a, phase_a * a * a, phase_a * a};
}

// Fundamental rms phasor of one cycle of uniformly spaced samples starting at t0,
// referenced to cos(w t).
inline cplx dft_phasor(const std::vector<double>& cycle, double t0, double w, double dt) {
    cplx acc = 0.0;
    for (std::size_t k = 0; k < cycle.size(); ++k) acc += cycle[k] * std::polar(1.0, -w * (t0 + k * dt));
    return acc * std::sqrt(2.0) / static_cast<double>(cycle.size());
}

}  // namespace oracle
