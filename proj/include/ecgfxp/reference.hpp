// Double-precision reference implementation of the whole chain: the golden
// model the fixed-point path is verified against.
//
// The filters are realized in direct convolution form (the zero-state
// recursions and their causal FIR expansions coincide), divisions are real
// divisions, and the detector/feature logic mirrors the fixed-point
// automaton with real-valued blends. Shared values come from RunConfig and
// PipelineConstants only; no fixed-point code is reused.

#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <deque>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "ecgfxp/config.hpp"
#include "ecgfxp/features.hpp"
#include "ecgfxp/stages.hpp"

namespace ecgfxp {

struct RefTap {
    double raw_in = 0;
    double sf = 0;
    double derivative_out = 0;
    double squared = 0;
    double si = 0;
    uint64_t sample_index = 0;
};

struct RefEvent {
    uint64_t si_peak_index = 0;
    uint64_t sf_peak_index = 0;
    double si_peak_value = 0;
    double sf_peak_value = 0;
};

struct RefWidth {
    uint64_t emit_index = 0;
    int samples = 0;
};

namespace refdetail {

// Causal FIR over a double-valued history buffer.
template <size_t N>
class Fir {
  public:
    explicit Fir(std::array<double, N> taps) : taps_(taps) {}

    double step(double x) {
        hist_[head_] = x;
        head_ = (head_ + 1) % N;
        double acc = 0;
        for (size_t k = 0; k < N; ++k) acc += taps_[k] * hist_[(head_ + N - 1 - k) % N];
        return acc;
    }

    void reset() { hist_.fill(0); }

  private:
    std::array<double, N> taps_;
    std::array<double, N> hist_{};
    size_t head_ = 0;
};

inline Fir<11> make_lowpass() {
    return Fir<11>({1, 2, 3, 4, 5, 6, 5, 4, 3, 2, 1});
}

inline Fir<32> make_highpass() {
    std::array<double, 32> t{};
    for (int k = 0; k < 32; ++k) t[k] = -1.0 / 32.0;
    t[16] = 31.0 / 32.0;
    return Fir<32>(t);
}

inline Fir<5> make_derivative() {
    return Fir<5>({2.0 / 8, 1.0 / 8, 0.0, -1.0 / 8, -2.0 / 8});
}

// Mean of the 32 samples preceding the current one, recomputed from the
// window each step so no incremental rounding accrues.
class Integrator {
  public:
    double step(double x) {
        double acc = 0;
        for (double v : win_) acc += v;
        win_[head_] = x;
        head_ = (head_ + 1) % win_.size();
        return acc / 32.0;
    }

    void reset() { win_.fill(0); }

  private:
    std::array<double, PipelineConstants::kIntegratorWindow> win_{};
    size_t head_ = 0;
};

// Local-maximum emitter, the real-valued twin of the detector's tracker.
class PeakTracker {
  public:
    struct Peak {
        uint64_t index;
        double value;
    };

    std::optional<Peak> step(uint64_t index, double value) {
        std::optional<Peak> out;
        if (has_prev_) {
            if (value > prev_) {
                rising_ = true;
            } else if (value < prev_) {
                if (rising_) out = Peak{index - 1, prev_};
                rising_ = false;
            }
        }
        prev_ = value;
        has_prev_ = true;
        return out;
    }

  private:
    double prev_ = 0;
    bool has_prev_ = false;
    bool rising_ = false;
};

}  // namespace refdetail

class ReferencePipeline {
  public:
    ReferencePipeline()
        : lp_(refdetail::make_lowpass()),
          hp_(refdetail::make_highpass()),
          dv_(refdetail::make_derivative()) {}

    RefTap step(double x) {
        RefTap tap;
        tap.raw_in = x;
        tap.sf = hp_.step(lp_.step(x));
        tap.derivative_out = dv_.step(tap.sf);
        tap.squared = tap.derivative_out * tap.derivative_out;
        tap.si = ig_.step(tap.squared);
        tap.sample_index = index_++;
        return tap;
    }

    void reset() {
        lp_.reset();
        hp_.reset();
        dv_.reset();
        ig_.reset();
        index_ = 0;
    }

  private:
    refdetail::Fir<11> lp_;
    refdetail::Fir<32> hp_;
    refdetail::Fir<5> dv_;
    refdetail::Integrator ig_;
    uint64_t index_ = 0;
};

// Real-valued dual-channel detector: same decision structure as the
// fixed-point one, literal 0.125/0.875 and 0.25 coefficients.
class ReferenceDetector {
  public:
    ReferenceDetector(const RunConfig& cfg, double fs)
        : refractory_(cfg.refractory_samples),
          coincidence_(PipelineConstants::kCoincidenceWindow),
          mean_window_(cfg.seed_mean_window(fs)),
          seed_samples_(cfg.seed_samples(fs)) {}

    struct Thresholds {
        double spk_i = 0, npk_i = 0, thr_i = 0;
        double spk_f = 0, npk_f = 0, thr_f = 0;
        uint64_t refractory_until = 0;
        bool seeded = false;
    };

    void seed(std::span<const RefTap> taps) {
        if (static_cast<int>(taps.size()) < seed_samples_)
            throw std::invalid_argument("ReferenceDetector::seed: insufficient signal, need " +
                                        std::to_string(seed_samples_) + " samples, got " +
                                        std::to_string(taps.size()));
        seed_channel(taps, true, st_.spk_i, st_.npk_i);
        seed_channel(taps, false, st_.spk_f, st_.npk_f);
        update_thr();
        st_.refractory_until = 0;
        st_.seeded = true;
    }

    std::optional<RefEvent> step(const RefTap& tap) {
        if (!st_.seeded) throw std::logic_error("ReferenceDetector::step before seed");
        const uint64_t n = tap.sample_index;
        std::optional<RefEvent> out;
        if (auto pf = sf_tracker_.step(n, tap.sf)) {
            if (auto ev = on_sf_peak(pf->index, pf->value)) out = ev;
        }
        if (auto pi = si_tracker_.step(n, tap.si)) {
            if (auto ev = on_si_peak(pi->index, pi->value); ev && !out) out = ev;
        }
        expire_pending(n);
        return out;
    }

    const Thresholds& thresholds() const { return st_; }

  private:
    struct SfPeak {
        uint64_t index;
        double value;
    };
    struct Pending {
        uint64_t index;
        double value;
        uint64_t expires;
    };

    void seed_channel(std::span<const RefTap> taps, bool si, double& spk, double& npk) {
        const int w = std::min(mean_window_, seed_samples_);
        double window_sum = 0, total = 0, best = 0;
        bool have_best = false;
        for (int i = 0; i < seed_samples_; ++i) {
            const double v = si ? taps[i].si : taps[i].sf;
            window_sum += v;
            total += v;
            if (i >= w) window_sum -= si ? taps[i - w].si : taps[i - w].sf;
            if (i >= w - 1 && (!have_best || window_sum > best)) {
                best = window_sum;
                have_best = true;
            }
        }
        spk = best / w;
        npk = total / seed_samples_;
    }

    static double blend(double est, double peak) { return est + 0.125 * (peak - est); }

    void update_thr() {
        if (st_.npk_i > st_.spk_i) st_.npk_i = st_.spk_i;
        if (st_.npk_f > st_.spk_f) st_.npk_f = st_.spk_f;
        st_.thr_i = st_.npk_i + 0.25 * (st_.spk_i - st_.npk_i);
        st_.thr_f = st_.npk_f + 0.25 * (st_.spk_f - st_.npk_f);
    }

    bool in_refractory(uint64_t i) const { return events_ > 0 && i <= st_.refractory_until; }

    std::optional<RefEvent> on_sf_peak(uint64_t j, double w) {
        if (w > st_.thr_f) {
            if (pending_ && j <= pending_->expires && !in_refractory(pending_->index))
                return emit(pending_->index, pending_->value, j, w);
            sf_ring_.push_back({j, w});
            return std::nullopt;
        }
        if (!in_refractory(j)) {
            st_.npk_f = blend(st_.npk_f, w);
            update_thr();
        }
        return std::nullopt;
    }

    std::optional<RefEvent> on_si_peak(uint64_t i, double v) {
        if (v <= 0 || in_refractory(i)) return std::nullopt;
        if (v > st_.thr_i) {
            const SfPeak* best = nullptr;
            for (const SfPeak& p : sf_ring_) {
                if (p.index + coincidence_ >= i && p.value > st_.thr_f &&
                    (!best || p.value > best->value))
                    best = &p;
            }
            if (best) return emit(i, v, best->index, best->value);
            pending_ = Pending{i, v, i + coincidence_};
            return std::nullopt;
        }
        st_.npk_i = blend(st_.npk_i, v);
        update_thr();
        return std::nullopt;
    }

    RefEvent emit(uint64_t i, double v, uint64_t j, double w) {
        st_.spk_i = blend(st_.spk_i, v);
        st_.spk_f = blend(st_.spk_f, w);
        update_thr();
        st_.refractory_until = i + refractory_;
        pending_.reset();
        std::erase_if(sf_ring_, [&](const SfPeak& p) { return p.index <= j; });
        ++events_;
        return RefEvent{i, j, v, w};
    }

    void expire_pending(uint64_t n) {
        if (pending_ && pending_->expires < n) {
            st_.npk_i = blend(st_.npk_i, pending_->value);
            update_thr();
            pending_.reset();
        }
        while (!sf_ring_.empty() &&
               sf_ring_.front().index + 2 * static_cast<uint64_t>(coincidence_) < n)
            sf_ring_.pop_front();
    }

    int refractory_;
    int coincidence_;
    int mean_window_;
    int seed_samples_;
    uint64_t events_ = 0;

    Thresholds st_;
    refdetail::PeakTracker sf_tracker_;
    refdetail::PeakTracker si_tracker_;
    std::deque<SfPeak> sf_ring_;
    std::optional<Pending> pending_;
};

class RefWidthExtractor {
  public:
    explicit RefWidthExtractor(int holdoff_samples) : holdoff_(holdoff_samples) {}

    std::optional<RefWidth> step(double si, double thr, uint64_t index) {
        std::optional<RefWidth> out;
        if (counting_) {
            if (has_prev_ && si < prev_) {
                if (count_ > 0) {
                    out = RefWidth{index, count_};
                    holdoff_until_ = index + holdoff_;
                }
                counting_ = false;
                count_ = 0;
            } else {
                ++count_;
            }
        } else if (has_prev_ && si > prev_ && si > thr && index >= holdoff_until_) {
            counting_ = true;
            count_ = 0;
        }
        prev_ = si;
        has_prev_ = true;
        return out;
    }

  private:
    int holdoff_;
    bool counting_ = false;
    int count_ = 0;
    uint64_t holdoff_until_ = 0;
    double prev_ = 0;
    bool has_prev_ = false;
};

class RefRPeakExtractor {
  public:
    explicit RefRPeakExtractor(int rise_guard_samples) : guard_(rise_guard_samples) {}

    std::optional<uint64_t> step(double si, uint64_t index) {
        std::optional<uint64_t> out;
        if (has_prev_) {
            const double p = si - prev_;
            if (have_p_ && p <= 0 && prev_p_ > 0 && nonneg_run_ >= guard_) out = index - 1;
            nonneg_run_ = (p >= 0) ? nonneg_run_ + 1 : 0;
            prev_p_ = p;
            have_p_ = true;
        }
        prev_ = si;
        has_prev_ = true;
        return out;
    }

  private:
    int guard_;
    double prev_ = 0;
    double prev_p_ = 0;
    int nonneg_run_ = 0;
    bool has_prev_ = false;
    bool have_p_ = false;
};

struct ReferenceRun {
    std::vector<RefTap> taps;
    std::vector<double> thr_i_trace;
    std::vector<double> thr_f_trace;
    std::vector<RefEvent> events;
    std::vector<RefWidth> widths;
    std::vector<uint64_t> rpeaks;
    BeatAssembly assembly;
    double fs = 0;
};

inline BeatAssembly ref_assemble_beats(std::span<const RefEvent> events,
                                       std::span<const RefWidth> widths,
                                       std::span<const uint64_t> rpeaks,
                                       std::span<const RefTap> taps, double fs) {
    constexpr int kDelay = PipelineConstants::kPipelineDelay;
    constexpr int kMatch = PipelineConstants::kRpeakMatchWindow;
    constexpr int kRefine = PipelineConstants::kRefineWindow;

    BeatAssembly out;
    const auto n = static_cast<int64_t>(taps.size());

    auto refine = [&](uint64_t tap_index) -> uint64_t {
        const int64_t base = static_cast<int64_t>(tap_index) - kDelay;
        int64_t lo = std::max<int64_t>(0, base - kRefine);
        int64_t hi = std::min<int64_t>(n - 1, base + kRefine);
        if (lo > hi) return static_cast<uint64_t>(std::max<int64_t>(0, base));
        int64_t best = lo;
        for (int64_t j = lo + 1; j <= hi; ++j)
            if (taps[j].raw_in > taps[best].raw_in) best = j;
        return static_cast<uint64_t>(best);
    };

    auto distance = [](uint64_t a, uint64_t b) { return a > b ? a - b : b - a; };

    size_t wi = 0, ri = 0;
    std::optional<uint64_t> prev_r;
    for (const RefEvent& ev : events) {
        BeatFeatures beat;

        std::optional<int> width;
        while (wi < widths.size() && widths[wi].emit_index + kMatch < ev.si_peak_index) ++wi;
        size_t wbest = wi;
        for (size_t j = wi; j < widths.size() &&
                            widths[j].emit_index <= ev.si_peak_index + kMatch; ++j)
            if (distance(widths[j].emit_index, ev.si_peak_index) <=
                distance(widths[wbest].emit_index, ev.si_peak_index))
                wbest = j;
        if (wbest < widths.size() &&
            widths[wbest].emit_index <= ev.si_peak_index + kMatch) {
            width = widths[wbest].samples;
            wi = wbest + 1;
        }
        if (!width)
            out.warnings.push_back("event at " + std::to_string(ev.si_peak_index) +
                                   ": no QRS width within match window");
        beat.qrs_width_samples = width;

        std::optional<uint64_t> rpeak;
        while (ri < rpeaks.size() && rpeaks[ri] + kMatch < ev.si_peak_index) ++ri;
        size_t rbest = ri;
        for (size_t j = ri; j < rpeaks.size() &&
                            rpeaks[j] <= ev.si_peak_index + kMatch; ++j)
            if (distance(rpeaks[j], ev.si_peak_index) <=
                distance(rpeaks[rbest], ev.si_peak_index))
                rbest = j;
        if (rbest < rpeaks.size() && rpeaks[rbest] <= ev.si_peak_index + kMatch) {
            rpeak = rpeaks[rbest];
            ri = rbest + 1;
        }
        if (!rpeak)
            out.warnings.push_back("event at " + std::to_string(ev.si_peak_index) +
                                   ": no R-peak candidate within match window");

        uint64_t anchor = ev.si_peak_index;
        if (rpeak && distance(*rpeak, ev.si_peak_index) <=
                         static_cast<uint64_t>(PipelineConstants::kAnchorWindow))
            anchor = *rpeak;
        uint64_t r = refine(anchor);
        if (prev_r && r <= *prev_r) r = refine(ev.si_peak_index);
        if (prev_r && r <= *prev_r) continue;

        beat.r_peak_index = r;
        if (prev_r) {
            const RrHr rh = rr_and_hr(*prev_r, r, fs);
            beat.rr_interval_samples = rh.rr_samples;
            beat.heart_rate_bpm = rh.hr_bpm;
        }
        prev_r = r;
        out.beats.push_back(beat);
    }
    return out;
}

// Runs the whole reference chain: pipeline over all samples, thresholds
// seeded from the first seed window, detection and feature extraction from
// the end of the startup transient onward.
inline ReferenceRun run_reference(std::span<const double> signal, const RunConfig& cfg,
                                  double fs) {
    if (signal.empty()) throw std::invalid_argument("run_reference: empty signal");
    if (signal.size() < static_cast<size_t>(cfg.seed_samples(fs)))
        throw std::invalid_argument("run_reference: signal shorter than the threshold "
                                    "seed window (" +
                                    std::to_string(cfg.seed_samples(fs)) + " samples)");
    for (size_t i = 0; i < signal.size(); ++i)
        if (!std::isfinite(signal[i]))
            throw std::invalid_argument("run_reference: non-finite sample at index " +
                                        std::to_string(i));

    ReferenceRun run;
    run.fs = fs;

    ReferencePipeline pipe;
    run.taps.reserve(signal.size());
    for (double x : signal) run.taps.push_back(pipe.step(x));

    ReferenceDetector det(cfg, fs);
    det.seed(std::span<const RefTap>(run.taps).first(
        static_cast<size_t>(cfg.seed_samples(fs))));

    RefWidthExtractor width(cfg.holdoff_samples);
    RefRPeakExtractor rpeak(cfg.rise_guard_samples);

    run.thr_i_trace.assign(run.taps.size(), 0.0);
    run.thr_f_trace.assign(run.taps.size(), 0.0);
    for (size_t n = 0; n < run.taps.size(); ++n) {
        const RefTap& tap = run.taps[n];
        if (n >= PipelineConstants::kWarmupSamples) {
            if (auto ev = det.step(tap)) run.events.push_back(*ev);
            if (auto w = width.step(tap.si, det.thresholds().thr_i, tap.sample_index))
                run.widths.push_back(*w);
            if (auto r = rpeak.step(tap.si, tap.sample_index)) run.rpeaks.push_back(*r);
        }
        run.thr_i_trace[n] = det.thresholds().thr_i;
        run.thr_f_trace[n] = det.thresholds().thr_f;
    }

    run.assembly = ref_assemble_beats(run.events, run.widths, run.rpeaks, run.taps, fs);
    return run;
}

// --- fixed-vs-reference comparison -----------------------------------------

struct CompareTolerances {
    double stage_deviation = std::ldexp(1.0, -10);  // real units, per stage
    int beat_window_samples = 3;
};

struct ComparisonReport {
    double max_dev_raw_in = 0;
    double max_dev_sf = 0;
    double max_dev_derivative = 0;
    double max_dev_squared = 0;
    double max_dev_si = 0;

    size_t fixed_beat_count = 0;
    size_t ref_beat_count = 0;
    size_t matched_beats = 0;
    int max_beat_delta = 0;  // among matched pairs, in samples
    std::vector<uint64_t> fixed_unmatched;
    std::vector<uint64_t> ref_unmatched;

    CompareTolerances tolerances;

    double max_stage_deviation() const {
        return std::max({max_dev_raw_in, max_dev_sf, max_dev_derivative, max_dev_squared,
                         max_dev_si});
    }
    bool stages_ok() const { return max_stage_deviation() < tolerances.stage_deviation; }
    bool beats_agree() const { return fixed_unmatched.empty() && ref_unmatched.empty(); }
    bool ok() const { return stages_ok() && beats_agree(); }
};

// Greedy one-to-one matching of two increasing index sequences within a
// sample window; both sequences are consumed left to right.
inline void match_beats(std::span<const uint64_t> a, std::span<const uint64_t> b, int window,
                        size_t& matched, int& max_delta, std::vector<uint64_t>& a_only,
                        std::vector<uint64_t>& b_only) {
    size_t i = 0, j = 0;
    matched = 0;
    max_delta = 0;
    while (i < a.size() && j < b.size()) {
        const int64_t d = static_cast<int64_t>(a[i]) - static_cast<int64_t>(b[j]);
        if (std::llabs(d) <= window) {
            ++matched;
            max_delta = std::max(max_delta, static_cast<int>(std::llabs(d)));
            ++i;
            ++j;
        } else if (d < 0) {
            a_only.push_back(a[i++]);
        } else {
            b_only.push_back(b[j++]);
        }
    }
    while (i < a.size()) a_only.push_back(a[i++]);
    while (j < b.size()) b_only.push_back(b[j++]);
}

inline ComparisonReport compare_runs(std::span<const PipelineTap> fixed_taps,
                                     std::span<const BeatFeatures> fixed_beats,
                                     const ReferenceRun& ref,
                                     CompareTolerances tol = {}) {
    if (fixed_taps.size() != ref.taps.size())
        throw std::invalid_argument("compare_runs: tap length mismatch (" +
                                    std::to_string(fixed_taps.size()) + " vs " +
                                    std::to_string(ref.taps.size()) + ")");
    ComparisonReport rep;
    rep.tolerances = tol;
    for (size_t n = 0; n < fixed_taps.size(); ++n) {
        const PipelineTap& f = fixed_taps[n];
        const RefTap& r = ref.taps[n];
        rep.max_dev_raw_in = std::max(rep.max_dev_raw_in, std::fabs(f.raw_in.to_real() - r.raw_in));
        rep.max_dev_sf = std::max(rep.max_dev_sf, std::fabs(f.sf.to_real() - r.sf));
        rep.max_dev_derivative =
            std::max(rep.max_dev_derivative, std::fabs(f.derivative_out.to_real() - r.derivative_out));
        rep.max_dev_squared = std::max(rep.max_dev_squared, std::fabs(f.squared.to_real() - r.squared));
        rep.max_dev_si = std::max(rep.max_dev_si, std::fabs(f.si.to_real() - r.si));
    }

    std::vector<uint64_t> fixed_idx, ref_idx;
    fixed_idx.reserve(fixed_beats.size());
    for (const BeatFeatures& b : fixed_beats) fixed_idx.push_back(b.r_peak_index);
    ref_idx.reserve(ref.assembly.beats.size());
    for (const BeatFeatures& b : ref.assembly.beats) ref_idx.push_back(b.r_peak_index);

    rep.fixed_beat_count = fixed_idx.size();
    rep.ref_beat_count = ref_idx.size();
    match_beats(fixed_idx, ref_idx, tol.beat_window_samples, rep.matched_beats,
                rep.max_beat_delta, rep.fixed_unmatched, rep.ref_unmatched);
    return rep;
}

}  // namespace ecgfxp
