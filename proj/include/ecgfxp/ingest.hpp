// Record input: MIT-BIH format-212 signal files with minimal .hea headers,
// CSV signals and annotation-index files, 360 -> 200 Hz resampling, and a
// synthetic beat-train generator for tests.

#pragma once

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <optional>
#include <span>
#include <sstream>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace ecgfxp {

enum class SampleUnit { millivolts, adc_counts, unscaled };

struct EcgRecord {
    std::vector<double> samples;
    double fs = 0;
    SampleUnit unit = SampleUnit::unscaled;
    double gain = 1.0;      // ADC units per millivolt
    double baseline = 0.0;  // ADC value at 0 mV
    std::string channel_name;
    std::string source;
};

struct AnnotationSet {
    std::vector<uint64_t> beat_indices;  // strictly increasing
    double fs = 0;                       // 0: timebase unspecified, assume the record's
};

inline AnnotationSet make_annotations(std::vector<uint64_t> indices, double fs) {
    for (size_t i = 1; i < indices.size(); ++i)
        if (indices[i] <= indices[i - 1])
            throw std::invalid_argument("annotations: indices not strictly increasing at entry " +
                                        std::to_string(i));
    return {std::move(indices), fs};
}

// --- format 212 -------------------------------------------------------------
//
// Three bytes pack two 12-bit two's-complement samples:
//   A = byte0 | ((byte1 & 0x0F) << 8)
//   B = byte2 | ((byte1 & 0xF0) << 4)
// each sign-extended from bit 11. Samples interleave across the record's
// signals in frame order.

inline std::vector<int16_t> decode_212(std::span<const uint8_t> bytes) {
    if (bytes.size() % 3 != 0)
        throw std::invalid_argument("decode_212: truncated input, " +
                                    std::to_string(bytes.size() % 3) +
                                    " stray byte(s) at offset " +
                                    std::to_string(bytes.size() - bytes.size() % 3));
    std::vector<int16_t> out;
    out.reserve(bytes.size() / 3 * 2);
    auto sext12 = [](int v) { return static_cast<int16_t>(v & 0x800 ? v - 0x1000 : v); };
    for (size_t i = 0; i + 2 < bytes.size(); i += 3) {
        const int a = bytes[i] | ((bytes[i + 1] & 0x0F) << 8);
        const int b = bytes[i + 2] | ((bytes[i + 1] & 0xF0) << 4);
        out.push_back(sext12(a));
        out.push_back(sext12(b));
    }
    return out;
}

inline std::vector<uint8_t> encode_212(std::span<const int16_t> samples) {
    if (samples.size() % 2 != 0)
        throw std::invalid_argument("encode_212: sample count must be even, got " +
                                    std::to_string(samples.size()));
    std::vector<uint8_t> out;
    out.reserve(samples.size() / 2 * 3);
    for (size_t i = 0; i < samples.size(); i += 2) {
        for (int k = 0; k < 2; ++k) {
            const int v = samples[i + k];
            if (v < -2048 || v > 2047)
                throw std::invalid_argument("encode_212: sample " + std::to_string(i + k) +
                                            " = " + std::to_string(v) +
                                            " outside 12-bit range");
        }
        const int a = samples[i] & 0xFFF;
        const int b = samples[i + 1] & 0xFFF;
        out.push_back(static_cast<uint8_t>(a & 0xFF));
        out.push_back(static_cast<uint8_t>(((a >> 8) & 0x0F) | (((b >> 8) & 0x0F) << 4)));
        out.push_back(static_cast<uint8_t>(b & 0xFF));
    }
    return out;
}

// One channel of an interleaved format-212 stream. n_samples counts samples
// of the selected channel; the stream must hold n_samples * nsig samples.
inline std::vector<int> read_212(std::span<const uint8_t> bytes, int channel, size_t n_samples,
                                 int nsig = 2) {
    if (nsig < 1 || nsig > 2)
        throw std::invalid_argument("read_212: nsig must be 1 or 2, got " + std::to_string(nsig));
    if (channel < 0 || channel >= nsig)
        throw std::invalid_argument("read_212: channel " + std::to_string(channel) +
                                    " out of range for " + std::to_string(nsig) + " signal(s)");
    const size_t need_flat = n_samples * static_cast<size_t>(nsig);
    const size_t need_bytes = (need_flat + 1) / 2 * 3;  // whole 3-byte groups
    if (bytes.size() < need_bytes)
        throw std::invalid_argument("read_212: need " + std::to_string(need_bytes) +
                                    " bytes for " + std::to_string(n_samples) +
                                    " samples, input ends at byte offset " +
                                    std::to_string(bytes.size()));
    const std::vector<int16_t> flat = decode_212(bytes.first(need_bytes));
    std::vector<int> out;
    out.reserve(n_samples);
    for (size_t i = 0; i < n_samples; ++i) out.push_back(flat[i * nsig + channel]);
    return out;
}

// --- WFDB .hea (minimal) ----------------------------------------------------

struct HeaderSignal {
    std::string file;
    int format = 0;
    double gain = 200.0;
    double baseline = 0.0;
    std::string description;
};

struct HeaderInfo {
    std::string record_name;
    int nsig = 0;
    double fs = 0;
    size_t n_samples = 0;  // 0 if the header does not state it
    std::vector<HeaderSignal> signals;
};

// Reads record name, signal count, sampling frequency, and per-signal file,
// format, gain, and baseline. Everything else in the header is ignored.
inline HeaderInfo parse_hea(const std::string& text) {
    std::istringstream in(text);
    std::string line;
    HeaderInfo hdr;
    bool have_record_line = false;
    int line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty() || line[0] == '#') continue;
        std::istringstream ls(line);
        if (!have_record_line) {
            std::string fs_field;
            if (!(ls >> hdr.record_name >> hdr.nsig))
                throw std::invalid_argument("parse_hea: malformed record line " +
                                            std::to_string(line_no));
            if (ls >> fs_field) hdr.fs = std::stod(fs_field);  // "360" or "360/..."
            size_t nsamp = 0;
            if (ls >> nsamp) hdr.n_samples = nsamp;
            if (hdr.nsig < 1 || hdr.fs <= 0)
                throw std::invalid_argument("parse_hea: bad signal count or rate on line " +
                                            std::to_string(line_no));
            have_record_line = true;
            continue;
        }
        if (static_cast<int>(hdr.signals.size()) == hdr.nsig) break;
        HeaderSignal sig;
        std::string fmt_field, gain_field;
        if (!(ls >> sig.file >> fmt_field >> gain_field))
            throw std::invalid_argument("parse_hea: malformed signal line " +
                                        std::to_string(line_no));
        sig.format = std::stoi(fmt_field);  // modifiers like "212x2" parse the prefix
        // gain field: gain, optionally "(baseline)" and "/units"
        const size_t paren = gain_field.find('(');
        sig.gain = std::stod(gain_field);
        bool baseline_from_gain = false;
        if (paren != std::string::npos) {
            sig.baseline = std::stod(gain_field.substr(paren + 1));
            baseline_from_gain = true;
        }
        double adc_res = 0, adc_zero = 0;
        if (ls >> adc_res >> adc_zero && !baseline_from_gain) sig.baseline = adc_zero;
        std::string tok, rest;
        for (int skip = 0; skip < 3 && (ls >> tok); ++skip) {}  // init value, checksum, block size
        std::getline(ls, rest);
        const size_t at = rest.find_first_not_of(" \t");
        if (at != std::string::npos) sig.description = rest.substr(at);
        if (sig.gain == 0) sig.gain = 200.0;  // WFDB convention for "unspecified"
        hdr.signals.push_back(sig);
    }
    if (!have_record_line || static_cast<int>(hdr.signals.size()) < hdr.nsig)
        throw std::invalid_argument("parse_hea: header ends before all signal lines");
    return hdr;
}

inline std::vector<uint8_t> read_binary_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open " + path.string());
    std::vector<uint8_t> bytes((std::istreambuf_iterator<char>(in)),
                               std::istreambuf_iterator<char>());
    return bytes;
}

inline std::string read_text_file(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open " + path.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

// Loads one channel of a format-212 record given its .hea path.
inline EcgRecord load_record(const std::filesystem::path& hea_path, int channel,
                             SampleUnit unit = SampleUnit::millivolts) {
    const HeaderInfo hdr = parse_hea(read_text_file(hea_path));
    if (channel < 0 || channel >= hdr.nsig)
        throw std::invalid_argument("load_record: channel " + std::to_string(channel) +
                                    " out of range for " + std::to_string(hdr.nsig) +
                                    " signal(s)");
    const HeaderSignal& sig = hdr.signals[channel];
    if (sig.format != 212)
        throw std::invalid_argument("load_record: unsupported format " +
                                    std::to_string(sig.format) + " (only 212 is handled)");
    const auto dat_path = hea_path.parent_path() / sig.file;
    const std::vector<uint8_t> bytes = read_binary_file(dat_path);
    size_t n = hdr.n_samples;
    if (n == 0) n = bytes.size() / 3 * 2 / static_cast<size_t>(hdr.nsig);
    const std::vector<int> adc = read_212(bytes, channel, n, hdr.nsig);

    EcgRecord rec;
    rec.fs = hdr.fs;
    rec.unit = unit;
    rec.gain = sig.gain;
    rec.baseline = sig.baseline;
    rec.channel_name = sig.description.empty() ? ("ch" + std::to_string(channel)) : sig.description;
    rec.source = hdr.record_name + ":" + rec.channel_name;
    rec.samples.reserve(adc.size());
    for (int v : adc)
        rec.samples.push_back(unit == SampleUnit::millivolts ? (v - sig.baseline) / sig.gain
                                                             : static_cast<double>(v));
    return rec;
}

// --- resampling -------------------------------------------------------------

// Linear interpolation from 360 Hz onto the 200 Hz output grid; output
// length floor(duration * 200). Values stay within the input's range.
inline EcgRecord resample_to_200(const EcgRecord& rec) {
    if (rec.fs != 360.0)
        throw std::invalid_argument("resample_to_200: input rate " + std::to_string(rec.fs) +
                                    " unsupported; records must be at 200 or 360 Hz");
    EcgRecord out = rec;
    out.fs = 200.0;
    out.samples.clear();
    const size_t n_out = rec.samples.size() * 5 / 9;
    out.samples.reserve(n_out);
    for (size_t k = 0; k < n_out; ++k) {
        const double pos = static_cast<double>(k) * 9.0 / 5.0;
        size_t i0 = static_cast<size_t>(pos);
        if (i0 >= rec.samples.size() - 1) i0 = rec.samples.size() - 2;
        const double frac = pos - static_cast<double>(i0);
        out.samples.push_back(rec.samples[i0] + frac * (rec.samples[i0 + 1] - rec.samples[i0]));
    }
    return out;
}

inline AnnotationSet resample_annotations_to_200(const AnnotationSet& ann) {
    if (ann.fs != 360.0)
        throw std::invalid_argument("resample_annotations_to_200: timebase " +
                                    std::to_string(ann.fs) + " unsupported; expected 360 Hz");
    std::vector<uint64_t> idx;
    idx.reserve(ann.beat_indices.size());
    for (uint64_t i : ann.beat_indices)
        idx.push_back(static_cast<uint64_t>(std::llround(static_cast<double>(i) * 5.0 / 9.0)));
    return make_annotations(std::move(idx), 200.0);
}

// --- CSV --------------------------------------------------------------------
//
// Signal CSV: first non-blank line `fs=<value>`, then one sample per line.
// Annotation CSV: optional `fs=<value>` line, then one integer index per
// line, strictly increasing.

inline EcgRecord read_csv(const std::string& text) {
    std::istringstream in(text);
    std::string line;
    EcgRecord rec;
    rec.unit = SampleUnit::unscaled;
    rec.source = "csv";
    rec.channel_name = "csv";
    int line_no = 0;
    bool have_fs = false;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
        if (!have_fs) {
            if (line.rfind("fs=", 0) != 0)
                throw std::invalid_argument("read_csv: line " + std::to_string(line_no) +
                                            ": expected header `fs=<value>`");
            rec.fs = std::stod(line.substr(3));
            if (rec.fs <= 0)
                throw std::invalid_argument("read_csv: line " + std::to_string(line_no) +
                                            ": fs must be positive");
            have_fs = true;
            continue;
        }
        try {
            size_t used = 0;
            const double v = std::stod(line, &used);
            if (line.find_first_not_of(" \t\r", used) != std::string::npos) throw std::invalid_argument("");
            rec.samples.push_back(v);
        } catch (const std::exception&) {
            throw std::invalid_argument("read_csv: line " + std::to_string(line_no) +
                                        ": cannot parse sample `" + line + "`");
        }
    }
    if (!have_fs) throw std::invalid_argument("read_csv: missing `fs=<value>` header");
    return rec;
}

inline AnnotationSet read_annotations_csv(const std::string& text) {
    std::istringstream in(text);
    std::string line;
    std::vector<uint64_t> idx;
    double fs = 0;
    int line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
        if (line.rfind("fs=", 0) == 0 && idx.empty() && fs == 0) {
            fs = std::stod(line.substr(3));
            continue;
        }
        long long v = 0;
        try {
            size_t used = 0;
            v = std::stoll(line, &used);
            if (v < 0 || line.find_first_not_of(" \t\r", used) != std::string::npos)
                throw std::invalid_argument("");
        } catch (const std::exception&) {
            throw std::invalid_argument("read_annotations_csv: line " + std::to_string(line_no) +
                                        ": cannot parse index `" + line + "`");
        }
        if (!idx.empty() && static_cast<uint64_t>(v) <= idx.back())
            throw std::invalid_argument("read_annotations_csv: line " + std::to_string(line_no) +
                                        ": indices must be strictly increasing");
        idx.push_back(static_cast<uint64_t>(v));
    }
    return {std::move(idx), fs};
}

inline std::string write_csv(const EcgRecord& rec) {
    std::ostringstream out;
    out.precision(17);
    out << "fs=" << rec.fs << "\n";
    for (double v : rec.samples) out << v << "\n";
    return out.str();
}

inline std::string write_annotations_csv(const AnnotationSet& ann) {
    std::ostringstream out;
    if (ann.fs > 0) {
        out.precision(17);
        out << "fs=" << ann.fs << "\n";
    }
    for (uint64_t i : ann.beat_indices) out << i << "\n";
    return out.str();
}

// --- synthetic beat trains --------------------------------------------------

// 64-bit linear congruential generator (Knuth's MMIX constants): state
// advances as s <- 6364136223846793005*s + 1442695040888963407; the top 53
// bits form a real in [0, 1). Documented here so the noise stream can be
// reproduced independently.
class Lcg64 {
  public:
    explicit Lcg64(uint64_t seed) : s_(seed) {}

    double next_unit() {
        s_ = s_ * 6364136223846793005ULL + 1442695040888963407ULL;
        return static_cast<double>(s_ >> 11) * 0x1p-53;
    }

  private:
    uint64_t s_;
};

// Train of raised-cosine lobes with exact period 60*fs/bpm samples; lobe
// centers sit at round((k + 1/2) * period) so the first and last lobes are
// whole, and are returned as the ground-truth annotation set. Optional
// additive uniform noise in [-noise_amplitude, +noise_amplitude].
inline std::pair<EcgRecord, AnnotationSet> synth_beats(double fs, double bpm, double amplitude,
                                                       double qrs_width_ms, double duration_s,
                                                       double noise_amplitude,
                                                       uint64_t noise_seed = 1) {
    if (fs <= 0 || bpm <= 0 || duration_s <= 0)
        throw std::invalid_argument("synth_beats: fs, bpm, duration must be positive");
    const size_t n = static_cast<size_t>(std::llround(duration_s * fs));
    const double period = 60.0 * fs / bpm;
    const int width = std::max(3, static_cast<int>(std::lround(qrs_width_ms * fs / 1000.0)));

    EcgRecord rec;
    rec.fs = fs;
    rec.unit = SampleUnit::unscaled;
    rec.channel_name = "synth";
    {
        std::ostringstream src;
        src << "synth bpm=" << bpm << " amp=" << amplitude << " width_ms=" << qrs_width_ms
            << " noise=" << noise_amplitude << " seed=" << noise_seed;
        rec.source = src.str();
    }
    rec.samples.assign(n, 0.0);

    std::vector<uint64_t> centers;
    for (size_t k = 0;; ++k) {
        const auto c = static_cast<int64_t>(std::llround((static_cast<double>(k) + 0.5) * period));
        if (c + width / 2 >= static_cast<int64_t>(n)) break;
        centers.push_back(static_cast<uint64_t>(c));
        for (int t = -width / 2; t <= width / 2; ++t) {
            const double phase = 2.0 * std::acos(-1.0) * t / width;
            rec.samples[static_cast<size_t>(c + t)] += amplitude * 0.5 * (1.0 + std::cos(phase));
        }
    }

    if (noise_amplitude > 0) {
        Lcg64 rng(noise_seed);
        for (double& v : rec.samples) v += noise_amplitude * (2.0 * rng.next_unit() - 1.0);
    }
    return {std::move(rec), make_annotations(std::move(centers), fs)};
}

}  // namespace ecgfxp
