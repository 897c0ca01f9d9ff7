// Per-beat feature extraction from the SI stream and detected events:
// QRS width (rise-time counter with hold-off), R-peak localization
// (first-derivative local maxima with a sustained-rise guard), and
// R-R interval / heart rate.

#pragma once

#include <algorithm>
#include <cstdint>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "ecgfxp/config.hpp"
#include "ecgfxp/detect.hpp"
#include "ecgfxp/fxp.hpp"
#include "ecgfxp/stages.hpp"

namespace ecgfxp {

// Rise-time counter over SI. Arms on a rising sample above the live
// threshold, counts until the local peak, then emits the count and holds
// off for holdoff_samples to suppress false re-triggers.
class WidthExtractor {
  public:
    explicit WidthExtractor(int holdoff_samples) : holdoff_(holdoff_samples) {}

    struct Width {
        uint64_t emit_index;  // sample at which the peak was confirmed
        int samples;
    };

    std::optional<Width> step(const FxpValue& si, const FxpValue& thr, uint64_t index) {
        std::optional<Width> out;
        if (counting_) {
            if (has_prev_ && si.raw < prev_raw_) {
                // a fall on the very first sample after the trigger means a
                // single-sample blip, not a QRS; drop it without arming the
                // hold-off so a genuine complex right behind it still counts
                if (count_ > 0) {
                    out = Width{index, count_};
                    holdoff_until_ = index + holdoff_;
                }
                counting_ = false;
                count_ = 0;
            } else {
                ++count_;
            }
        } else if (has_prev_ && si.raw > prev_raw_ && si.raw > thr.raw &&
                   index >= holdoff_until_) {
            counting_ = true;
            count_ = 0;
        }
        prev_raw_ = si.raw;
        has_prev_ = true;
        return out;
    }

    bool counting() const { return counting_; }
    int count() const { return count_; }

  private:
    int holdoff_;
    bool counting_ = false;
    int count_ = 0;
    uint64_t holdoff_until_ = 0;
    int64_t prev_raw_ = 0;
    bool has_prev_ = false;
};

// Local-maximum tracker over SI via the first difference p(n) = y(n)-y(n-1).
// Emits index-1 when p turns non-positive after a positive step, provided
// the preceding rise_guard_samples differences were all non-negative.
class RPeakExtractor {
  public:
    explicit RPeakExtractor(int rise_guard_samples) : guard_(rise_guard_samples) {}

    std::optional<uint64_t> step(const FxpValue& si, uint64_t index) {
        std::optional<uint64_t> out;
        if (has_prev_) {
            const int64_t p = si.raw - prev_raw_;
            if (have_p_ && p <= 0 && prev_p_ > 0 && nonneg_run_ >= guard_) out = index - 1;
            nonneg_run_ = (p >= 0) ? nonneg_run_ + 1 : 0;
            prev_p_ = p;
            have_p_ = true;
        }
        prev_raw_ = si.raw;
        has_prev_ = true;
        return out;
    }

  private:
    int guard_;
    int64_t prev_raw_ = 0;
    int64_t prev_p_ = 0;
    int nonneg_run_ = 0;
    bool has_prev_ = false;
    bool have_p_ = false;
};

struct RrHr {
    int64_t rr_samples;
    double hr_bpm;
};

// rr = cur - prev;  hr = 60 * fs / rr
inline RrHr rr_and_hr(uint64_t prev_peak, uint64_t cur_peak, double fs) {
    if (cur_peak <= prev_peak)
        throw std::invalid_argument("rr_and_hr: non-increasing peak indices (" +
                                    std::to_string(prev_peak) + " -> " +
                                    std::to_string(cur_peak) + ")");
    const int64_t rr = static_cast<int64_t>(cur_peak - prev_peak);
    return {rr, 60.0 * fs / static_cast<double>(rr)};
}

struct BeatFeatures {
    uint64_t r_peak_index = 0;  // raw-signal timebase, delay-compensated
    std::optional<int> qrs_width_samples;
    std::optional<int64_t> rr_interval_samples;  // absent for the first beat
    std::optional<double> heart_rate_bpm;        // absent for the first beat
};

struct BeatAssembly {
    std::vector<BeatFeatures> beats;
    std::vector<std::string> warnings;  // unmatched widths/peaks, not fatal
};

// Pairs each detected event with its width and R-peak, maps indices back to
// the raw timebase, and computes rr/hr between consecutive beats. The R
// position is refined to the raw-signal maximum near the delay-compensated
// index; if pairing would break monotonicity the event's own index is used.
inline BeatAssembly assemble_beats(std::span<const QrsEvent> events,
                                   std::span<const WidthExtractor::Width> widths,
                                   std::span<const uint64_t> rpeaks,
                                   std::span<const PipelineTap> taps, double fs) {
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
            if (taps[j].raw_in.raw > taps[best].raw_in.raw) best = j;
        return static_cast<uint64_t>(best);
    };

    auto distance = [](uint64_t a, uint64_t b) { return a > b ? a - b : b - a; };

    size_t wi = 0, ri = 0;
    std::optional<uint64_t> prev_r;
    for (const QrsEvent& ev : events) {
        BeatFeatures beat;

        // nearest unconsumed width within the match window (a beat's envelope
        // can carry two humps, so take the closest emission, not the first)
        std::optional<int> width;
        while (wi < widths.size() &&
               widths[wi].emit_index + kMatch < ev.si_peak_index)
            ++wi;
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

        // nearest unconsumed R-peak candidate within the match window
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

        // a candidate anchors the refinement only when it corroborates the
        // event; a stray candidate from the other hump would pull the search
        // window off the apex entirely
        uint64_t anchor = ev.si_peak_index;
        if (rpeak && distance(*rpeak, ev.si_peak_index) <=
                         static_cast<uint64_t>(PipelineConstants::kAnchorWindow))
            anchor = *rpeak;
        uint64_t r = refine(anchor);
        if (prev_r && r <= *prev_r) r = refine(ev.si_peak_index);
        if (prev_r && r <= *prev_r) {
            out.warnings.push_back("event at " + std::to_string(ev.si_peak_index) +
                                   ": dropped, R index would not be increasing");
            continue;
        }

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

}  // namespace ecgfxp
