// Shared configuration for the fixed-point pipeline and its double-precision
// reference. Both paths read the same constants so a drifting value cannot
// silently invalidate a comparison.

#pragma once

#include <cmath>

#include "ecgfxp/fxp.hpp"

namespace ecgfxp {

// Constants fixed by the 200 Hz filter design. Delay and window lengths are
// in samples, not milliseconds: the difference equations hard-code them.
struct PipelineConstants {
    static constexpr int kDesignFs = 200;

    static constexpr int kLowpassDelay = 5;
    static constexpr int kHighpassDelay = 16;
    static constexpr int kDerivativeDelay = 2;
    static constexpr int kIntegratorWindow = 32;
    static constexpr int kIntegratorDelay = 16;

    // Cumulative group delay from raw input to the integrator output, used to
    // map event indices back to raw-signal time.
    static constexpr int kPipelineDelay =
        kLowpassDelay + kHighpassDelay + kDerivativeDelay + kIntegratorDelay;

    // Zero-state startup produces spurious integrator energy; the first
    // kWarmupSamples taps are transient and excluded from detection.
    static constexpr int kWarmupSamples = 64;

    // SF and SI peaks belonging to one beat may sit up to this many samples
    // apart (the SI path carries the extra integrator delay).
    static constexpr int kCoincidenceWindow = 40;

    // Beat assembly: R-peak candidates pair with an event within
    // kRpeakMatchWindow, a candidate replaces the event as the anchor only
    // when the two agree within kAnchorWindow, and the final index is the
    // raw-signal maximum within +/- kRefineWindow (150 ms at 200 Hz) of the
    // delay-compensated anchor. The group delay above is nominal; real QRS
    // shapes shift the integrator peak by up to ~20 samples, so the search
    // window has to be wide enough to still straddle the R apex.
    static constexpr int kRpeakMatchWindow = 40;
    static constexpr int kAnchorWindow = 12;
    static constexpr int kRefineWindow = 30;
};

struct RunConfig {
    FxpFormat format{32, 16};

    int refractory_samples = 40;  // 200 ms at 200 Hz, between detections
    int holdoff_samples = 20;     // 100 ms width-counter hold-off
    int rise_guard_samples = 50;  // sustained-rise guard of the R-peak tracker
    double seed_seconds = 2.0;    // threshold seeding window

    bool resample = true;  // resample 360 Hz records to 200 Hz on ingest
    int channel = 0;       // record channel selection

    // Multiplies input samples before quantization. The default keeps
    // millivolt-scale ECG within [-4, 4], where the fixed-vs-reference
    // deviation bounds hold with margin for every supported format.
    double input_scale = 0.25;

    // 150 ms moving-mean window used when seeding thresholds.
    int seed_mean_window(double fs) const {
        return std::max(1, static_cast<int>(std::lround(0.150 * fs)));
    }
    int seed_samples(double fs) const {
        return static_cast<int>(std::lround(seed_seconds * fs));
    }
};

}  // namespace ecgfxp
