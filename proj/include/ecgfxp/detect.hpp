// Adaptive dual-channel thresholding over the SF and SI taps.
//
// Thresholds are seeded from a moving-mean scan of the first seconds of
// signal, then adapt with the classic running peak-estimate rule:
//   signal peak   spk <- spk + (peak - spk)/8
//   noise peak    npk <- npk + (peak - npk)/8
//   threshold     thr  = npk + (spk - npk)/4
// realized as arithmetic shifts on the fixed-point raw values. A QRS event
// is emitted when an SI local maximum exceeds thr_i and an SF local maximum
// within the coincidence window exceeds thr_f, outside the refractory
// period. Non-emitted maxima update the noise estimate of their channel;
// maxima inside the refractory period are ignored outright.

#pragma once

#include <cstdint>
#include <deque>
#include <optional>
#include <span>
#include <stdexcept>
#include <vector>

#include "ecgfxp/config.hpp"
#include "ecgfxp/fxp.hpp"
#include "ecgfxp/stages.hpp"

namespace ecgfxp {

struct ThresholdState {
    FxpValue spk_i, npk_i, thr_i;
    FxpValue spk_f, npk_f, thr_f;
    uint64_t refractory_until = 0;
    bool seeded = false;
};

struct QrsEvent {
    uint64_t si_peak_index = 0;
    uint64_t sf_peak_index = 0;
    FxpValue si_peak_value;
    FxpValue sf_peak_value;
};

namespace detail {

// Emits (index, value) of each local maximum of a raw-valued stream: the
// last sample of a rise (or rise-plateau) once the stream falls.
class PeakTracker {
  public:
    struct Peak {
        uint64_t index;
        int64_t value;
    };

    std::optional<Peak> step(uint64_t index, int64_t value) {
        std::optional<Peak> out;
        if (has_prev_) {
            if (value > prev_) {
                rising_ = true;
            } else if (value < prev_) {
                if (rising_) out = Peak{index - 1, prev_};
                rising_ = false;
            }
            // equal: plateau, state unchanged
        }
        prev_ = value;
        has_prev_ = true;
        return out;
    }

    void reset() {
        has_prev_ = false;
        rising_ = false;
        prev_ = 0;
    }

  private:
    int64_t prev_ = 0;
    bool has_prev_ = false;
    bool rising_ = false;
};

}  // namespace detail

class Detector {
  public:
    Detector(FxpFormat fmt, const RunConfig& cfg, double fs)
        : fmt_(fmt),
          refractory_(cfg.refractory_samples),
          coincidence_(PipelineConstants::kCoincidenceWindow),
          mean_window_(cfg.seed_mean_window(fs)),
          seed_samples_(cfg.seed_samples(fs)) {
        state_.spk_i = state_.npk_i = state_.thr_i = fxp_zero(fmt);
        state_.spk_f = state_.npk_f = state_.thr_f = fxp_zero(fmt);
    }

    // Seeds spk from the maximum moving mean and npk from the overall mean
    // of each channel over the seed window.
    void seed(std::span<const PipelineTap> taps) {
        if (static_cast<int>(taps.size()) < seed_samples_)
            throw std::invalid_argument("Detector::seed: insufficient signal, need " +
                                        std::to_string(seed_samples_) + " samples, got " +
                                        std::to_string(taps.size()));
        seed_channel(taps, /*si=*/true, state_.spk_i, state_.npk_i);
        seed_channel(taps, /*si=*/false, state_.spk_f, state_.npk_f);
        clamp_and_update_thr();
        state_.refractory_until = 0;
        state_.seeded = true;
    }

    // Feeds one tap; emits at most one event (possibly for an earlier index,
    // once its cross-channel confirmation arrives).
    std::optional<QrsEvent> step(const PipelineTap& tap) {
        if (!state_.seeded) throw std::logic_error("Detector::step before seed");
        const uint64_t n = tap.sample_index;
        std::optional<QrsEvent> out;

        if (auto pf = sf_tracker_.step(n, tap.sf.raw)) {
            if (auto ev = on_sf_peak(pf->index, pf->value)) out = ev;
        }
        if (auto pi = si_tracker_.step(n, tap.si.raw)) {
            if (auto ev = on_si_peak(pi->index, pi->value); ev && !out) out = ev;
        }
        expire_pending(n);
        return out;
    }

    const ThresholdState& thresholds() const { return state_; }

  private:
    struct SfPeak {
        uint64_t index;
        int64_t value;
    };
    struct Pending {
        uint64_t index;
        int64_t value;
        uint64_t expires;
    };

    void seed_channel(std::span<const PipelineTap> taps, bool si, FxpValue& spk, FxpValue& npk) {
        const int w = std::min(mean_window_, seed_samples_);
        wide_t window_sum = 0, total = 0;
        wide_t best = 0;
        bool have_best = false;
        for (int i = 0; i < seed_samples_; ++i) {
            const int64_t v = si ? taps[i].si.raw : taps[i].sf.raw;
            window_sum += v;
            total += v;
            if (i >= w) window_sum -= si ? taps[i - w].si.raw : taps[i - w].sf.raw;
            if (i >= w - 1 && (!have_best || window_sum > best)) {
                best = window_sum;
                have_best = true;
            }
        }
        spk = {detail::saturate(floor_div(best, w), fmt_), fmt_};
        npk = {detail::saturate(floor_div(total, seed_samples_), fmt_), fmt_};
    }

    static wide_t floor_div(wide_t a, wide_t b) {
        wide_t q = a / b;
        if ((a % b != 0) && ((a < 0) != (b < 0))) --q;
        return q;
    }

    static int64_t blend_peak(int64_t est, int64_t peak) {
        // est + (peak - est)/8, the 0.125/0.875 update as a shift
        return est + ((peak - est) >> 3);
    }

    void clamp_and_update_thr() {
        if (state_.npk_i.raw > state_.spk_i.raw) state_.npk_i.raw = state_.spk_i.raw;
        if (state_.npk_f.raw > state_.spk_f.raw) state_.npk_f.raw = state_.spk_f.raw;
        state_.thr_i.raw = state_.npk_i.raw + ((state_.spk_i.raw - state_.npk_i.raw) >> 2);
        state_.thr_f.raw = state_.npk_f.raw + ((state_.spk_f.raw - state_.npk_f.raw) >> 2);
    }

    bool in_refractory(uint64_t i) const { return events_ > 0 && i <= state_.refractory_until; }

    std::optional<QrsEvent> on_sf_peak(uint64_t j, int64_t w) {
        if (w > state_.thr_f.raw) {
            if (pending_ && j <= pending_->expires && !in_refractory(pending_->index)) {
                return emit(pending_->index, pending_->value, j, w);
            }
            sf_ring_.push_back({j, w});
            return std::nullopt;
        }
        if (!in_refractory(j)) {
            state_.npk_f.raw = blend_peak(state_.npk_f.raw, w);
            clamp_and_update_thr();
        }
        return std::nullopt;
    }

    std::optional<QrsEvent> on_si_peak(uint64_t i, int64_t v) {
        if (v <= 0 || in_refractory(i)) return std::nullopt;
        if (v > state_.thr_i.raw) {
            const SfPeak* best = nullptr;
            for (const SfPeak& p : sf_ring_) {
                if (p.index + coincidence_ >= i && p.value > state_.thr_f.raw &&
                    (!best || p.value > best->value))
                    best = &p;
            }
            if (best) return emit(i, v, best->index, best->value);
            pending_ = Pending{i, v, i + coincidence_};
            return std::nullopt;
        }
        state_.npk_i.raw = blend_peak(state_.npk_i.raw, v);
        clamp_and_update_thr();
        return std::nullopt;
    }

    QrsEvent emit(uint64_t i, int64_t v, uint64_t j, int64_t w) {
        state_.spk_i.raw = blend_peak(state_.spk_i.raw, v);
        state_.spk_f.raw = blend_peak(state_.spk_f.raw, w);
        clamp_and_update_thr();
        state_.refractory_until = i + refractory_;
        pending_.reset();
        // peaks at or before the confirming SF peak are spent
        std::erase_if(sf_ring_, [&](const SfPeak& p) { return p.index <= j; });
        ++events_;
        return QrsEvent{i, j, FxpValue{v, fmt_}, FxpValue{w, fmt_}};
    }

    void expire_pending(uint64_t n) {
        if (pending_ && pending_->expires < n) {
            state_.npk_i.raw = blend_peak(state_.npk_i.raw, pending_->value);
            clamp_and_update_thr();
            pending_.reset();
        }
        while (!sf_ring_.empty() &&
               sf_ring_.front().index + 2 * static_cast<uint64_t>(coincidence_) < n)
            sf_ring_.pop_front();
    }

    FxpFormat fmt_;
    int refractory_;
    int coincidence_;
    int mean_window_;
    int seed_samples_;
    uint64_t events_ = 0;

    ThresholdState state_;
    detail::PeakTracker sf_tracker_;
    detail::PeakTracker si_tracker_;
    std::deque<SfPeak> sf_ring_;
    std::optional<Pending> pending_;
};

}  // namespace ecgfxp
