// Command-line front end: run the detector on records, dump per-sample stage
// taps, benchmark against annotations, compare the fixed-point path with the
// double-precision reference, and generate synthetic test signals.
//
// Exit codes: 0 success, 1 I/O or parse error, 2 benchmark floor not met
// (or --check tolerance failure in `compare`).

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <sstream>
#include <string>
#include <unordered_set>
#include <vector>

#include <CLI11.hpp>

#include "ecgfxp/config.hpp"
#include "ecgfxp/ingest.hpp"
#include "ecgfxp/reference.hpp"
#include "ecgfxp/runner.hpp"

namespace {

using namespace ecgfxp;

struct CommonOpts {
    int word_bits = 32;
    int frac_bits = 16;
    RunConfig cfg;
    std::string record_path;
    std::string config_path;  // consumed before parsing; kept for --help

    RunConfig build_config() const {
        RunConfig out = cfg;
        out.format = FxpFormat(word_bits, frac_bits);  // validates
        if (out.refractory_samples <= 0 || out.holdoff_samples <= 0 ||
            out.rise_guard_samples <= 0 || out.seed_seconds <= 0)
            throw std::invalid_argument("sample counts and seed window must be positive");
        return out;
    }
};

void add_common_options(CLI::App* cmd, CommonOpts& o) {
    cmd->add_option("record", o.record_path, "input record: .hea (format 212) or signal .csv")
        ->required();
    cmd->add_option("--word-bits", o.word_bits, "fixed-point word width")
        ->capture_default_str();
    cmd->add_option("--frac-bits", o.frac_bits, "fixed-point fraction bits")
        ->capture_default_str();
    cmd->add_option("--refractory", o.cfg.refractory_samples,
                    "detection refractory period, samples")
        ->capture_default_str();
    cmd->add_option("--holdoff", o.cfg.holdoff_samples, "width-counter hold-off, samples")
        ->capture_default_str();
    cmd->add_option("--rise-guard", o.cfg.rise_guard_samples,
                    "sustained-rise guard of the R-peak tracker, samples")
        ->capture_default_str();
    cmd->add_option("--seed-seconds", o.cfg.seed_seconds, "threshold seeding window, seconds")
        ->capture_default_str();
    cmd->add_option("--channel", o.cfg.channel, "record channel (for .hea inputs)")
        ->capture_default_str();
    cmd->add_option("--input-scale", o.cfg.input_scale,
                    "input scaling applied before quantization")
        ->capture_default_str();
    cmd->add_flag("--no-resample", [&o](size_t) { o.cfg.resample = false; },
                  "reject 360 Hz input instead of resampling to 200 Hz");
    cmd->add_option("--config", o.config_path,
                    "key=value file with the long option names as keys");
}

// Splices a --config file's key=value pairs into the argument list as
// --key=value tokens. Keys already present on the command line are skipped,
// so explicit flags always win. This runs before the parser because CLI11
// only processes config files attached to the root app, never a subcommand.
std::vector<std::string> expand_config(std::vector<std::string> args) {
    auto it = std::find_if(args.begin(), args.end(), [](const std::string& a) {
        return a == "--config" || a.rfind("--config=", 0) == 0;
    });
    if (it == args.end()) return args;

    std::string path;
    size_t insert_at;
    if (*it == "--config") {
        if (std::next(it) == args.end())
            throw std::invalid_argument("--config requires a file path");
        path = *std::next(it);
        insert_at = static_cast<size_t>(std::distance(args.begin(), it)) + 2;
    } else {
        path = it->substr(std::string("--config=").size());
        insert_at = static_cast<size_t>(std::distance(args.begin(), it)) + 1;
    }

    std::unordered_set<std::string> given;
    for (const std::string& a : args)
        if (a.rfind("--", 0) == 0) given.insert(a.substr(0, a.find('=')));

    std::ifstream in(path);
    if (!in) throw std::invalid_argument("cannot open config file: " + path);

    auto trim = [](const std::string& s) {
        const auto b = s.find_first_not_of(" \t\r");
        const auto e = s.find_last_not_of(" \t\r");
        return b == std::string::npos ? std::string() : s.substr(b, e - b + 1);
    };

    std::vector<std::string> extra;
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        const std::string stripped = trim(line);
        if (stripped.empty() || stripped[0] == '#' || stripped[0] == ';') continue;
        const auto eq = stripped.find('=');
        const std::string key = eq == std::string::npos ? "" : trim(stripped.substr(0, eq));
        const std::string value = eq == std::string::npos ? "" : trim(stripped.substr(eq + 1));
        if (key.empty() || value.empty())
            throw std::invalid_argument(path + ":" + std::to_string(lineno) +
                                        ": expected key=value");
        if (key == "config")
            throw std::invalid_argument(path + ": nested config files are not supported");
        if (given.count("--" + key)) continue;
        extra.push_back("--" + key + "=" + value);
    }
    args.insert(args.begin() + static_cast<long>(insert_at), extra.begin(), extra.end());
    return args;
}

bool ends_with(const std::string& s, const std::string& suffix) {
    return s.size() >= suffix.size() && s.compare(s.size() - suffix.size(), suffix.size(), suffix) == 0;
}

EcgRecord load_input(const std::string& path, const RunConfig& cfg) {
    if (ends_with(path, ".hea")) return load_record(path, cfg.channel);
    if (ends_with(path, ".csv")) return read_csv(read_text_file(path));
    throw std::invalid_argument("input must be a .hea or .csv file, got: " + path);
}

struct PreparedRun {
    PreparedSignal sig;
    FixedRun run;
};

PreparedRun execute(const CommonOpts& o) {
    const RunConfig cfg = o.build_config();
    const EcgRecord rec = load_input(o.record_path, cfg);
    PreparedRun out{prepare_record(rec, cfg), {}};
    out.run = run_fixed(out.sig.samples, cfg, out.sig.fs);
    return out;
}

void write_output(const std::string& path, const std::string& text) {
    if (path == "-") {
        std::cout << text;
        return;
    }
    std::ofstream f(path);
    if (!f) throw std::runtime_error("cannot write " + path);
    f << text;
}

// --- run ---------------------------------------------------------------------

std::string beat_table(const FixedRun& run, bool csv) {
    std::ostringstream out;
    out << std::fixed;
    if (csv) {
        out << "r_peak_index,time_s,qrs_width_samples,rr_samples,hr_bpm\n";
        for (const BeatFeatures& b : run.assembly.beats) {
            out << b.r_peak_index << ',' << std::setprecision(3)
                << static_cast<double>(b.r_peak_index) / run.fs << ',';
            if (b.qrs_width_samples) out << *b.qrs_width_samples;
            out << ',';
            if (b.rr_interval_samples) out << *b.rr_interval_samples;
            out << ',';
            if (b.heart_rate_bpm) out << std::setprecision(3) << *b.heart_rate_bpm;
            out << '\n';
        }
        return out.str();
    }
    out << "  r_index    time_s  width  rr     hr_bpm\n";
    for (const BeatFeatures& b : run.assembly.beats) {
        out << std::setw(9) << b.r_peak_index << std::setw(10) << std::setprecision(3)
            << static_cast<double>(b.r_peak_index) / run.fs;
        if (b.qrs_width_samples)
            out << std::setw(7) << *b.qrs_width_samples;
        else
            out << std::setw(7) << '-';
        if (b.rr_interval_samples)
            out << std::setw(7) << *b.rr_interval_samples;
        else
            out << std::setw(7) << '-';
        if (b.heart_rate_bpm)
            out << std::setw(9) << std::setprecision(2) << *b.heart_rate_bpm;
        else
            out << std::setw(9) << '-';
        out << '\n';
    }
    out << "beats: " << run.assembly.beats.size() << '\n';
    return out.str();
}

int cmd_run(const CommonOpts& o, bool csv) {
    const PreparedRun pr = execute(o);
    std::cout << beat_table(pr.run, csv);
    for (const std::string& w : pr.run.assembly.warnings) std::cerr << "note: " << w << '\n';
    return 0;
}

// --- stages -------------------------------------------------------------------

int cmd_stages(const CommonOpts& o, const std::string& out_path) {
    const PreparedRun pr = execute(o);
    std::unordered_set<uint64_t> event_at;
    for (const QrsEvent& ev : pr.run.events) event_at.insert(ev.si_peak_index);

    std::ostringstream out;
    out.precision(10);
    out << "index,raw,sf,derivative,squared,si,thr_i,qrs_flag\n";
    for (size_t n = 0; n < pr.run.taps.size(); ++n) {
        const PipelineTap& t = pr.run.taps[n];
        out << n << ',' << t.raw_in.to_real() << ',' << t.sf.to_real() << ','
            << t.derivative_out.to_real() << ',' << t.squared.to_real() << ','
            << t.si.to_real() << ',' << FxpValue{pr.run.thr_i_raw[n], pr.run.format}.to_real()
            << ',' << (event_at.count(n) ? 1 : 0) << '\n';
    }
    write_output(out_path, out.str());
    return 0;
}

// --- bench --------------------------------------------------------------------

int cmd_bench(const CommonOpts& o, const std::string& ann_path, double match_ms,
              double min_sens, double min_ppv) {
    const PreparedRun pr = execute(o);
    const AnnotationSet ann_raw = read_annotations_csv(read_text_file(ann_path));
    const AnnotationSet ann = align_annotations(ann_raw, pr.sig.fs);
    const int window = static_cast<int>(std::lround(match_ms * pr.sig.fs / 1000.0));

    const std::vector<uint64_t> detected = beat_indices(pr.run.assembly.beats);
    const BenchReport rep = score_detections(detected, ann.beat_indices, window);

    std::ostringstream out;
    out << "record: " << pr.sig.source << "  fs: " << pr.sig.fs << '\n'
        << "annotations: " << ann.beat_indices.size() << "  detected: " << detected.size()
        << "  match window: +/-" << window << " samples\n"
        << "TP " << rep.true_positives << "  FP " << rep.false_positives << "  FN "
        << rep.false_negatives << '\n'
        << std::fixed << std::setprecision(6) << "sensitivity " << rep.sensitivity
        << "  positive_predictivity " << rep.positive_predictivity << '\n';
    std::cout << out.str();

    if (rep.sensitivity < min_sens || rep.positive_predictivity < min_ppv) {
        std::cout << "floors: FAIL (required sensitivity >= " << min_sens
                  << ", positive_predictivity >= " << min_ppv << ")\n";
        return 2;
    }
    return 0;
}

// --- compare ------------------------------------------------------------------

int cmd_compare(const CommonOpts& o, double stage_tol, int beat_window, bool check) {
    const RunConfig cfg = o.build_config();
    const EcgRecord rec = load_input(o.record_path, cfg);
    const PreparedSignal sig = prepare_record(rec, cfg);
    const FixedRun fixed = run_fixed(sig.samples, cfg, sig.fs);
    const ReferenceRun ref = run_reference(sig.samples, cfg, sig.fs);

    CompareTolerances tol;
    tol.stage_deviation = stage_tol;
    tol.beat_window_samples = beat_window;
    const ComparisonReport rep = compare_runs(fixed.taps, fixed.assembly.beats, ref, tol);

    std::ostringstream out;
    out << "samples: " << fixed.taps.size() << "  format: " << cfg.format.str()
        << "  fs: " << sig.fs << '\n';
    out << std::scientific << std::setprecision(6);
    out << "stage max |fixed - reference|:\n"
        << "  raw_in     " << rep.max_dev_raw_in << '\n'
        << "  sf         " << rep.max_dev_sf << '\n'
        << "  derivative " << rep.max_dev_derivative << '\n'
        << "  squared    " << rep.max_dev_squared << '\n'
        << "  si         " << rep.max_dev_si << '\n';
    out << "beats: fixed " << rep.fixed_beat_count << "  reference " << rep.ref_beat_count
        << "  matched " << rep.matched_beats << " (+/-" << beat_window << " samples, max delta "
        << rep.max_beat_delta << ")\n";
    if (!rep.fixed_unmatched.empty()) {
        out << "fixed-only beats:";
        for (uint64_t i : rep.fixed_unmatched) out << ' ' << i;
        out << '\n';
    }
    if (!rep.ref_unmatched.empty()) {
        out << "reference-only beats:";
        for (uint64_t i : rep.ref_unmatched) out << ' ' << i;
        out << '\n';
    }
    out << "stage tolerance " << stage_tol << ": " << (rep.stages_ok() ? "ok" : "exceeded")
        << '\n'
        << "beat agreement: " << (rep.beats_agree() ? "ok" : "disagree") << '\n';
    std::cout << out.str();
    return check && !rep.ok() ? 2 : 0;
}

// --- synth --------------------------------------------------------------------

int cmd_synth(double fs, double bpm, double amplitude, double width_ms, double duration,
              double noise, uint64_t seed, const std::string& out_path,
              const std::string& ann_path) {
    const auto [rec, ann] = synth_beats(fs, bpm, amplitude, width_ms, duration, noise, seed);
    write_output(out_path, write_csv(rec));
    if (!ann_path.empty()) write_output(ann_path, write_annotations_csv(ann));
    std::cerr << "generated " << rec.samples.size() << " samples, " << ann.beat_indices.size()
              << " beats\n";
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"streaming QRS detection in configurable fixed-point arithmetic", "ecgfxp"};
    app.require_subcommand(1);

    CommonOpts run_o, stages_o, bench_o, compare_o;
    bool run_csv = false;
    std::string stages_out = "-";
    std::string bench_ann;
    double bench_match_ms = 150.0, bench_min_sens = 0.0, bench_min_ppv = 0.0;
    double compare_tol = std::ldexp(1.0, -10);
    int compare_beat_window = 3;
    bool compare_check = false;
    double sy_fs = 200, sy_bpm = 72, sy_amp = 1.0, sy_width = 100, sy_dur = 30, sy_noise = 0;
    uint64_t sy_seed = 1;
    std::string sy_out = "-", sy_ann;

    CLI::App* c_run = app.add_subcommand("run", "detect beats, print the per-beat table");
    add_common_options(c_run, run_o);
    c_run->add_flag("--csv", run_csv, "machine-readable CSV instead of the aligned table");

    CLI::App* c_stages =
        app.add_subcommand("stages", "dump per-sample stage taps as CSV for plotting");
    add_common_options(c_stages, stages_o);
    c_stages->add_option("--out", stages_out, "output path, - for stdout")
        ->capture_default_str();

    CLI::App* c_bench =
        app.add_subcommand("bench", "score detections against a beat annotation CSV");
    add_common_options(c_bench, bench_o);
    c_bench->add_option("annotations", bench_ann, "annotation CSV (one index per line)")
        ->required();
    c_bench->add_option("--match-ms", bench_match_ms, "matching tolerance, milliseconds")
        ->capture_default_str();
    c_bench->add_option("--min-sensitivity", bench_min_sens, "floor; exit 2 if below")
        ->capture_default_str();
    c_bench->add_option("--min-positive-predictivity", bench_min_ppv, "floor; exit 2 if below")
        ->capture_default_str();

    CLI::App* c_compare = app.add_subcommand(
        "compare", "run fixed-point and double-precision paths, report deviations");
    add_common_options(c_compare, compare_o);
    c_compare->add_option("--stage-tol", compare_tol, "per-stage deviation tolerance, real units")
        ->capture_default_str();
    c_compare->add_option("--beat-window", compare_beat_window, "beat matching window, samples")
        ->capture_default_str();
    c_compare->add_flag("--check", compare_check, "exit 2 if tolerances are exceeded");

    CLI::App* c_synth = app.add_subcommand("synth", "generate a synthetic beat-train CSV");
    c_synth->add_option("--fs", sy_fs, "sampling rate, Hz")->capture_default_str();
    c_synth->add_option("--bpm", sy_bpm, "beats per minute")->capture_default_str();
    c_synth->add_option("--amplitude", sy_amp, "lobe amplitude")->capture_default_str();
    c_synth->add_option("--width-ms", sy_width, "lobe width, milliseconds")
        ->capture_default_str();
    c_synth->add_option("--duration", sy_dur, "duration, seconds")->capture_default_str();
    c_synth->add_option("--noise", sy_noise, "uniform noise amplitude")->capture_default_str();
    c_synth->add_option("--seed", sy_seed, "noise generator seed")->capture_default_str();
    c_synth->add_option("--out", sy_out, "signal CSV path, - for stdout")->capture_default_str();
    c_synth->add_option("--ann", sy_ann, "also write the ground-truth annotation CSV here");

    std::vector<std::string> args(argv + 1, argv + argc);
    try {
        args = expand_config(std::move(args));
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    }
    std::reverse(args.begin(), args.end());  // parse(vector) wants reversed tokens
    try {
        app.parse(std::move(args));
    } catch (const CLI::ParseError& e) {
        const int rc = app.exit(e);  // prints the message; 0 for --help
        return rc == 0 ? 0 : 1;
    }

    try {
        if (app.got_subcommand(c_run)) return cmd_run(run_o, run_csv);
        if (app.got_subcommand(c_stages)) return cmd_stages(stages_o, stages_out);
        if (app.got_subcommand(c_bench))
            return cmd_bench(bench_o, bench_ann, bench_match_ms, bench_min_sens, bench_min_ppv);
        if (app.got_subcommand(c_compare))
            return cmd_compare(compare_o, compare_tol, compare_beat_window, compare_check);
        if (app.got_subcommand(c_synth))
            return cmd_synth(sy_fs, sy_bpm, sy_amp, sy_width, sy_dur, sy_noise, sy_seed, sy_out,
                             sy_ann);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    }
    return 0;
}
