// Configurable signed fixed-point arithmetic with saturation.
//
// Models the numeric behavior of a hardware datapath: values are stored as
// raw two's-complement integers scaled by 2^-frac_bits, every operation
// produces an exact wide intermediate and then saturates to the word width.
// Rounding policies are fixed: quantization rounds to nearest (ties away
// from zero), multiplies and shifts truncate toward negative infinity
// (arithmetic shift), overflow saturates and never wraps.

#pragma once

#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <string>

namespace ecgfxp {

using wide_t = __int128;

struct FxpFormat {
    int word_bits = 32;
    int frac_bits = 16;

    FxpFormat() = default;
    FxpFormat(int word, int frac) : word_bits(word), frac_bits(frac) {
        if (word_bits < 2 || word_bits > 64)
            throw std::invalid_argument("FxpFormat: word_bits must be in [2, 64], got " +
                                        std::to_string(word_bits));
        if (frac_bits < 0 || frac_bits > word_bits - 1)
            throw std::invalid_argument("FxpFormat: frac_bits must be in [0, word_bits-1], got " +
                                        std::to_string(frac_bits));
    }

    // Raw-integer range of the word: [-2^(word_bits-1), 2^(word_bits-1) - 1].
    int64_t raw_min() const {
        return word_bits == 64 ? INT64_MIN : -(int64_t{1} << (word_bits - 1));
    }
    int64_t raw_max() const {
        return word_bits == 64 ? INT64_MAX : (int64_t{1} << (word_bits - 1)) - 1;
    }

    // One least-significant step, 2^-frac_bits.
    double resolution() const { return std::ldexp(1.0, -frac_bits); }

    bool operator==(const FxpFormat&) const = default;

    std::string str() const {
        return "w" + std::to_string(word_bits) + "f" + std::to_string(frac_bits);
    }
};

struct FxpValue {
    int64_t raw = 0;
    FxpFormat format{};

    double to_real() const { return std::ldexp(static_cast<double>(raw), -format.frac_bits); }
};

inline FxpValue fxp_zero(FxpFormat fmt) { return FxpValue{0, fmt}; }

namespace detail {

inline int64_t saturate(wide_t v, const FxpFormat& fmt) {
    const wide_t lo = fmt.raw_min();
    const wide_t hi = fmt.raw_max();
    if (v < lo) return fmt.raw_min();
    if (v > hi) return fmt.raw_max();
    return static_cast<int64_t>(v);
}

inline void require_same_format(const FxpValue& a, const FxpValue& b) {
    if (!(a.format == b.format))
        throw std::invalid_argument("fxp: format mismatch (" + a.format.str() + " vs " +
                                    b.format.str() + ")");
}

// Arithmetic right shift: truncation toward negative infinity.
inline wide_t ashr(wide_t v, int k) {
    if (k >= 127) return v < 0 ? -1 : 0;
    return v >> k;
}

}  // namespace detail

// Nearest representable value, ties away from zero; out-of-range saturates.
inline FxpValue quantize(double x, FxpFormat fmt) {
    if (!std::isfinite(x))
        throw std::invalid_argument("quantize: non-finite sample");
    const double scaled = std::round(std::ldexp(x, fmt.frac_bits));
    if (scaled <= static_cast<double>(fmt.raw_min())) return {fmt.raw_min(), fmt};
    if (scaled >= static_cast<double>(fmt.raw_max())) return {fmt.raw_max(), fmt};
    return {static_cast<int64_t>(scaled), fmt};
}

inline FxpValue fxp_add(const FxpValue& a, const FxpValue& b) {
    detail::require_same_format(a, b);
    return {detail::saturate(wide_t{a.raw} + b.raw, a.format), a.format};
}

inline FxpValue fxp_sub(const FxpValue& a, const FxpValue& b) {
    detail::require_same_format(a, b);
    return {detail::saturate(wide_t{a.raw} - b.raw, a.format), a.format};
}

// Full double-width product, arithmetic shift right by frac_bits, saturate.
inline FxpValue fxp_mul(const FxpValue& a, const FxpValue& b) {
    detail::require_same_format(a, b);
    const wide_t p = detail::ashr(wide_t{a.raw} * b.raw, a.format.frac_bits);
    return {detail::saturate(p, a.format), a.format};
}

// Arithmetic right shift of the raw value; magnitude shrinks, never saturates.
inline FxpValue shift_right(const FxpValue& a, int k) {
    if (k < 0) throw std::invalid_argument("shift_right: negative shift count");
    if (k >= 64) return {a.raw < 0 ? int64_t{-1} : int64_t{0}, a.format};
    return {a.raw >> k, a.format};
}

}  // namespace ecgfxp
