// End-to-end orchestration shared by the CLI and the test suite: prepare a
// record (resample, scale), run the fixed-point path, and score detections
// against annotations.

#pragma once

#include <cmath>
#include <cstdint>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "ecgfxp/config.hpp"
#include "ecgfxp/detect.hpp"
#include "ecgfxp/features.hpp"
#include "ecgfxp/fxp.hpp"
#include "ecgfxp/ingest.hpp"
#include "ecgfxp/stages.hpp"

namespace ecgfxp {

struct PreparedSignal {
    std::vector<double> samples;  // scaled, ready for either path
    double fs = 0;
    std::string source;
};

inline std::vector<double> apply_scale(std::span<const double> samples, double scale) {
    std::vector<double> out;
    out.reserve(samples.size());
    for (double v : samples) out.push_back(v * scale);
    return out;
}

// Resamples 360 Hz records to the 200 Hz design rate (if enabled) and
// applies the configured input scale. Other rates are rejected.
inline PreparedSignal prepare_record(const EcgRecord& rec, const RunConfig& cfg) {
    const EcgRecord* src = &rec;
    EcgRecord resampled;
    if (rec.fs == 360.0 && cfg.resample) {
        resampled = resample_to_200(rec);
        src = &resampled;
    } else if (rec.fs != 200.0) {
        throw std::invalid_argument("record rate " + std::to_string(rec.fs) +
                                    " Hz unsupported; supported: 200 (native), 360 (resampled)");
    }
    return {apply_scale(src->samples, cfg.input_scale), src->fs, rec.source};
}

struct FixedRun {
    std::vector<PipelineTap> taps;
    std::vector<int64_t> thr_i_raw;  // live SI threshold after each sample
    std::vector<int64_t> thr_f_raw;
    std::vector<QrsEvent> events;
    std::vector<WidthExtractor::Width> widths;
    std::vector<uint64_t> rpeaks;
    BeatAssembly assembly;
    FxpFormat format;
    double fs = 0;
};

// Fixed-point path over an already-prepared signal: quantize, run the five
// stages, seed thresholds on the first seed window, then detect and extract
// features from the end of the startup transient onward.
inline FixedRun run_fixed(std::span<const double> signal, const RunConfig& cfg, double fs) {
    if (signal.empty()) throw std::invalid_argument("run_fixed: empty signal");
    if (signal.size() < static_cast<size_t>(cfg.seed_samples(fs)))
        throw std::invalid_argument("run_fixed: signal shorter than the threshold seed "
                                    "window (" +
                                    std::to_string(cfg.seed_samples(fs)) + " samples)");
    for (size_t i = 0; i < signal.size(); ++i)
        if (!std::isfinite(signal[i]))
            throw std::invalid_argument("run_fixed: non-finite sample at index " +
                                        std::to_string(i));

    FixedRun run;
    run.format = cfg.format;
    run.fs = fs;

    Pipeline pipe(cfg.format);
    run.taps = pipe.process_real(signal);

    Detector det(cfg.format, cfg, fs);
    det.seed(std::span<const PipelineTap>(run.taps)
                 .first(static_cast<size_t>(cfg.seed_samples(fs))));

    WidthExtractor width(cfg.holdoff_samples);
    RPeakExtractor rpeak(cfg.rise_guard_samples);

    run.thr_i_raw.assign(run.taps.size(), 0);
    run.thr_f_raw.assign(run.taps.size(), 0);
    for (size_t n = 0; n < run.taps.size(); ++n) {
        const PipelineTap& tap = run.taps[n];
        if (n >= PipelineConstants::kWarmupSamples) {
            if (auto ev = det.step(tap)) run.events.push_back(*ev);
            const FxpValue thr = det.thresholds().thr_i;
            if (auto w = width.step(tap.si, thr, tap.sample_index)) run.widths.push_back(*w);
            if (auto r = rpeak.step(tap.si, tap.sample_index)) run.rpeaks.push_back(*r);
        }
        run.thr_i_raw[n] = det.thresholds().thr_i.raw;
        run.thr_f_raw[n] = det.thresholds().thr_f.raw;
    }

    run.assembly = assemble_beats(run.events, run.widths, run.rpeaks, run.taps, fs);
    return run;
}

// --- detection scoring ------------------------------------------------------

struct BenchReport {
    size_t true_positives = 0;
    size_t false_positives = 0;
    size_t false_negatives = 0;
    double sensitivity = 1.0;           // TP / (TP + FN)
    double positive_predictivity = 1.0; // TP / (TP + FP)
    int match_window_samples = 0;
};

// Greedy one-to-one matching of detected beat indices against annotation
// indices, both strictly increasing, within +/- window samples.
inline BenchReport score_detections(std::span<const uint64_t> detected,
                                    std::span<const uint64_t> annotated, int window) {
    BenchReport rep;
    rep.match_window_samples = window;
    size_t i = 0, j = 0;
    while (i < detected.size() && j < annotated.size()) {
        const int64_t d = static_cast<int64_t>(detected[i]) - static_cast<int64_t>(annotated[j]);
        if (std::llabs(d) <= window) {
            ++rep.true_positives;
            ++i;
            ++j;
        } else if (d < 0) {
            ++rep.false_positives;
            ++i;
        } else {
            ++rep.false_negatives;
            ++j;
        }
    }
    rep.false_positives += detected.size() - i;
    rep.false_negatives += annotated.size() - j;
    if (rep.true_positives + rep.false_negatives > 0)
        rep.sensitivity = static_cast<double>(rep.true_positives) /
                          static_cast<double>(rep.true_positives + rep.false_negatives);
    if (rep.true_positives + rep.false_positives > 0)
        rep.positive_predictivity = static_cast<double>(rep.true_positives) /
                                    static_cast<double>(rep.true_positives + rep.false_positives);
    return rep;
}

// Brings an annotation set onto the run's timebase (resampling 360 Hz
// indices if needed); fs 0 means the annotations already use the run's rate.
inline AnnotationSet align_annotations(const AnnotationSet& ann, double run_fs) {
    if (ann.fs == 0 || ann.fs == run_fs) return {ann.beat_indices, run_fs};
    if (ann.fs == 360.0 && run_fs == 200.0) return resample_annotations_to_200(ann);
    throw std::invalid_argument("annotations at " + std::to_string(ann.fs) +
                                " Hz cannot be aligned to a " + std::to_string(run_fs) +
                                " Hz run");
}

inline std::vector<uint64_t> beat_indices(std::span<const BeatFeatures> beats) {
    std::vector<uint64_t> idx;
    idx.reserve(beats.size());
    for (const BeatFeatures& b : beats) idx.push_back(b.r_peak_index);
    return idx;
}

}  // namespace ecgfxp
