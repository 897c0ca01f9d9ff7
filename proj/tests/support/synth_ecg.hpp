// Deterministic ECG-like record generator for tests that want MIT-BIH-shaped
// input (360 Hz, 11-bit ADC, gain 200, baseline 1024, two channels) without
// shipping database files. Morphology is a per-beat sum of Gaussian bumps
// (P, Q, R, S, T) over slow baseline wander, with slight deterministic R-R
// modulation and optional uniform noise.

#pragma once

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include "ecgfxp/ingest.hpp"

namespace ecgfxp::testsupport {

inline constexpr double kPi = 3.14159265358979323846;

struct StandinRecord {
    EcgRecord record;           // selected channel, millivolts, fs 360
    AnnotationSet annotations;  // R-peak sample indices, fs 360
    std::vector<int16_t> adc_flat;  // both channels interleaved, 12-bit range
};

inline double gauss_bump(double t, double amp, double center, double sigma) {
    const double z = (t - center) / sigma;
    return amp * std::exp(-0.5 * z * z);
}

// One beat's waveform value at offset dt seconds from the R peak.
inline double beat_shape(double dt, double r_amp) {
    return gauss_bump(dt, 0.12 * r_amp, -0.180, 0.028) +  // P
           gauss_bump(dt, -0.12 * r_amp, -0.024, 0.008) + // Q
           gauss_bump(dt, 1.00 * r_amp, 0.000, 0.011) +   // R
           gauss_bump(dt, -0.25 * r_amp, 0.026, 0.009) +  // S
           gauss_bump(dt, 0.32 * r_amp, 0.220, 0.048);    // T
}

inline StandinRecord make_standin(double duration_s, uint64_t seed = 7,
                                  double noise_mv = 0.02, int channel = 0) {
    constexpr double fs = 360.0;
    constexpr double bpm = 70.0;
    const size_t n = static_cast<size_t>(duration_s * fs);

    // R-peak instants with deterministic +/- ~6% R-R modulation
    const double base_rr = 60.0 * fs / bpm;
    std::vector<double> r_times;
    std::vector<uint64_t> r_indices;
    double t = 0.5 * base_rr;
    for (size_t k = 0; t < static_cast<double>(n) - 0.30 * fs; ++k) {
        r_times.push_back(t);
        r_indices.push_back(static_cast<uint64_t>(std::llround(t)));
        const double kk = static_cast<double>(k);
        t += base_rr * (1.0 + 0.04 * std::sin(2.0 * kPi * kk / 13.0) +
                        0.02 * std::sin(2.0 * kPi * kk / 5.0 + 1.0));
    }

    const double r_amp[2] = {1.10, 0.75};  // mV per channel
    std::vector<double> mv[2];
    for (int c = 0; c < 2; ++c) mv[c].assign(n, 0.0);

    for (size_t i = 0; i < n; ++i) {
        const double ts = static_cast<double>(i) / fs;
        const double wander = 0.05 * std::sin(2.0 * kPi * 0.25 * ts) +
                              0.03 * std::sin(2.0 * kPi * 0.07 * ts + 0.5);
        for (int c = 0; c < 2; ++c) mv[c][i] = wander * (c == 0 ? 1.0 : 0.7);
    }
    for (double rt : r_times) {
        const auto lo = static_cast<int64_t>(std::floor(rt - 0.35 * fs));
        const auto hi = static_cast<int64_t>(std::ceil(rt + 0.35 * fs));
        for (int64_t i = std::max<int64_t>(0, lo);
             i <= std::min<int64_t>(static_cast<int64_t>(n) - 1, hi); ++i) {
            const double dt = (static_cast<double>(i) - rt) / fs;
            for (int c = 0; c < 2; ++c) mv[c][static_cast<size_t>(i)] += beat_shape(dt, r_amp[c]);
        }
    }
    if (noise_mv > 0) {
        Lcg64 rng(seed);
        for (size_t i = 0; i < n; ++i)
            for (int c = 0; c < 2; ++c)
                mv[c][i] += noise_mv * (2.0 * rng.next_unit() - 1.0);
    }

    constexpr double gain = 200.0, baseline = 1024.0;
    StandinRecord out;
    out.adc_flat.reserve(2 * n);
    for (size_t i = 0; i < n; ++i) {
        for (int c = 0; c < 2; ++c) {
            double adc = std::round(mv[c][i] * gain + baseline);
            adc = std::min(2047.0, std::max(0.0, adc));
            out.adc_flat.push_back(static_cast<int16_t>(adc));
        }
    }

    out.record.fs = fs;
    out.record.unit = SampleUnit::millivolts;
    out.record.gain = gain;
    out.record.baseline = baseline;
    out.record.channel_name = channel == 0 ? "synth-I" : "synth-II";
    out.record.source = "standin seed=" + std::to_string(seed);
    out.record.samples.reserve(n);
    for (size_t i = 0; i < n; ++i)
        out.record.samples.push_back((out.adc_flat[2 * i + channel] - baseline) / gain);

    out.annotations = make_annotations(std::move(r_indices), fs);
    return out;
}

// Writes <name>.hea, <name>.dat (format 212), and <name>.ann.csv to dir.
inline void write_standin_record(const std::filesystem::path& dir, const std::string& name,
                                 const StandinRecord& rec) {
    std::filesystem::create_directories(dir);
    const size_t n = rec.adc_flat.size() / 2;
    {
        std::ofstream hea(dir / (name + ".hea"));
        hea << name << " 2 360 " << n << "\n";
        hea << name << ".dat 212 200 11 1024 0 0 0 synth-I\n";
        hea << name << ".dat 212 200 11 1024 0 0 0 synth-II\n";
    }
    {
        const std::vector<uint8_t> bytes = encode_212(rec.adc_flat);
        std::ofstream dat(dir / (name + ".dat"), std::ios::binary);
        dat.write(reinterpret_cast<const char*>(bytes.data()),
                  static_cast<std::streamsize>(bytes.size()));
    }
    {
        std::ofstream ann(dir / (name + ".ann.csv"));
        ann << write_annotations_csv(rec.annotations);
    }
}

}  // namespace ecgfxp::testsupport
