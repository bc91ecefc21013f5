#pragma once

#include <cmath>
#include <complex>

namespace ibrprot::control {

/// Sequence current references in per unit of the converter rating.
/// Positive q means reactive injection in that sequence's own frame.
struct SequenceRefs {
    double iq_pos = 0.0;
    double id_pos = 0.0;
    double iq_neg = 0.0;
    double id_neg = 0.0;

    double mag_pos() const { return std::hypot(iq_pos, id_pos); }
    double mag_neg() const { return std::hypot(iq_neg, id_neg); }
    bool finite() const {
        return std::isfinite(iq_pos) && std::isfinite(id_pos) && std::isfinite(iq_neg) && std::isfinite(id_neg);
    }
    /// d - jq, matching frames::QdFrame::packed().
    std::complex<double> pos() const { return {id_pos, -iq_pos}; }
    std::complex<double> neg() const { return {id_neg, -iq_neg}; }
    static SequenceRefs from_packed(std::complex<double> pos, std::complex<double> neg) {
        return {-pos.imag(), pos.real(), -neg.imag(), neg.real()};
    }

    bool operator==(const SequenceRefs&) const = default;
};

}  // namespace ibrprot::control
