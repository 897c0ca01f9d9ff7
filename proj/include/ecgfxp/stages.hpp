// The five Pan-Tompkins stages as resettable streaming operators over
// fixed-point samples, composed into a pipeline that exposes the bandpass
// (SF) and integrator (SI) taps.
//
// Every stage evaluates its difference equation exactly in a wide integer,
// then saturates once into the output register; delay lines hold the
// saturated, word-width values, as hardware registers would. All
// coefficients are small integers or power-of-two shifts.

#pragma once

#include <array>
#include <cstdint>
#include <span>
#include <vector>

#include "ecgfxp/config.hpp"
#include "ecgfxp/fxp.hpp"

namespace ecgfxp {

namespace detail {

// Fixed-length delay line over raw values. at(1) is the most recent push.
template <int N>
class DelayLine {
  public:
    void push(int64_t v) {
        buf_[head_] = v;
        head_ = (head_ + 1) % N;
    }
    int64_t at(int k) const { return buf_[(head_ + N - k) % N]; }
    void reset() { buf_.fill(0); }

  private:
    std::array<int64_t, N> buf_{};
    int head_ = 0;
};

}  // namespace detail

// y(n) = 2 y(n-1) - y(n-2) + x(n) - 2 x(n-6) + x(n-12)
// DC gain 36, group delay 5 samples.
class LowPassStage {
  public:
    explicit LowPassStage(FxpFormat fmt) : fmt_(fmt) {}

    FxpValue step(const FxpValue& x) {
        detail::require_same_format(x, FxpValue{0, fmt_});
        const wide_t acc = 2 * wide_t{y_.at(1)} - y_.at(2) + x.raw - 2 * wide_t{x_.at(6)} +
                           x_.at(12);
        const int64_t y = detail::saturate(acc, fmt_);
        x_.push(x.raw);
        y_.push(y);
        return {y, fmt_};
    }

    void reset() {
        x_.reset();
        y_.reset();
    }

  private:
    FxpFormat fmt_;
    detail::DelayLine<12> x_;
    detail::DelayLine<2> y_;
};

// y(n) = y(n-1) - x(n)/32 + x(n-16) - x(n-17) + x(n-32)/32
// Delayed all-pass minus low-pass: DC gain 0, passband gain ~1, delay 16.
// The 1/32 terms are arithmetic shifts applied to the individual samples, so
// they cancel exactly when the same sample leaves the 32-tap window and the
// recursion cannot drift.
class HighPassStage {
  public:
    explicit HighPassStage(FxpFormat fmt) : fmt_(fmt) {}

    FxpValue step(const FxpValue& x) {
        detail::require_same_format(x, FxpValue{0, fmt_});
        const wide_t acc = wide_t{y_prev_} - detail::ashr(x.raw, 5) + x_.at(16) - x_.at(17) +
                           detail::ashr(x_.at(32), 5);
        const int64_t y = detail::saturate(acc, fmt_);
        x_.push(x.raw);
        y_prev_ = y;
        return {y, fmt_};
    }

    void reset() {
        x_.reset();
        y_prev_ = 0;
    }

  private:
    FxpFormat fmt_;
    detail::DelayLine<32> x_;
    int64_t y_prev_ = 0;
};

// y(n) = (1/8) [2 x(n) + x(n-1) - x(n-3) - 2 x(n-4)]
// Five-point derivative estimate, delay 2 samples, zero at DC.
class DerivativeStage {
  public:
    explicit DerivativeStage(FxpFormat fmt) : fmt_(fmt) {}

    FxpValue step(const FxpValue& x) {
        detail::require_same_format(x, FxpValue{0, fmt_});
        const wide_t acc = 2 * wide_t{x.raw} + x_.at(1) - x_.at(3) - 2 * wide_t{x_.at(4)};
        const int64_t y = detail::saturate(detail::ashr(acc, 3), fmt_);
        x_.push(x.raw);
        return {y, fmt_};
    }

    void reset() { x_.reset(); }

  private:
    FxpFormat fmt_;
    detail::DelayLine<4> x_;
};

// y(n) = x(n)^2, point by point; output is never negative.
inline FxpValue square_step(const FxpValue& x) { return fxp_mul(x, x); }

// y(n) = (1/32) sum_{i=1..32} x(n-i)
// Mean of the 32 samples preceding the current one; division realized as a
// shift by 5. The running sum is maintained incrementally and always equals
// the exact sum of the window contents.
class IntegratorStage {
  public:
    explicit IntegratorStage(FxpFormat fmt) : fmt_(fmt) {}

    FxpValue step(const FxpValue& x) {
        detail::require_same_format(x, FxpValue{0, fmt_});
        const int64_t y = detail::saturate(detail::ashr(sum_, 5), fmt_);
        sum_ += x.raw;
        sum_ -= window_[head_];
        window_[head_] = x.raw;
        head_ = (head_ + 1) % kN;
        return {y, fmt_};
    }

    void reset() {
        window_.fill(0);
        sum_ = 0;
        head_ = 0;
    }

    std::array<int64_t, PipelineConstants::kIntegratorWindow> window() const { return window_; }
    wide_t running_sum() const { return sum_; }

  private:
    static constexpr int kN = PipelineConstants::kIntegratorWindow;
    FxpFormat fmt_;
    std::array<int64_t, kN> window_{};
    wide_t sum_ = 0;
    int head_ = 0;
};

// All intermediate taps for one input sample.
struct PipelineTap {
    FxpValue raw_in;
    FxpValue sf;              // bandpass output (low-pass + high-pass)
    FxpValue derivative_out;
    FxpValue squared;
    FxpValue si;              // moving-window integrator output
    uint64_t sample_index = 0;
};

// LP -> HP -> derivative -> square -> integrate, one tap per input sample.
class Pipeline {
  public:
    explicit Pipeline(FxpFormat fmt) : fmt_(fmt), lp_(fmt), hp_(fmt), dv_(fmt), ig_(fmt) {}

    PipelineTap step(const FxpValue& raw) {
        PipelineTap tap;
        tap.raw_in = raw;
        const FxpValue lp = lp_.step(raw);
        tap.sf = hp_.step(lp);
        tap.derivative_out = dv_.step(tap.sf);
        tap.squared = square_step(tap.derivative_out);
        tap.si = ig_.step(tap.squared);
        tap.sample_index = index_++;
        return tap;
    }

    std::vector<PipelineTap> process(std::span<const FxpValue> samples) {
        std::vector<PipelineTap> taps;
        taps.reserve(samples.size());
        for (const FxpValue& s : samples) taps.push_back(step(s));
        return taps;
    }

    std::vector<PipelineTap> process_real(std::span<const double> samples) {
        std::vector<PipelineTap> taps;
        taps.reserve(samples.size());
        for (double s : samples) taps.push_back(step(quantize(s, fmt_)));
        return taps;
    }

    void reset() {
        lp_.reset();
        hp_.reset();
        dv_.reset();
        ig_.reset();
        index_ = 0;
    }

    FxpFormat format() const { return fmt_; }

  private:
    FxpFormat fmt_;
    LowPassStage lp_;
    HighPassStage hp_;
    DerivativeStage dv_;
    IntegratorStage ig_;
    uint64_t index_ = 0;
};

}  // namespace ecgfxp
