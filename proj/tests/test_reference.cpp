#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <cstdint>
#include <vector>

#include "ecgfxp/ingest.hpp"
#include "ecgfxp/reference.hpp"
#include "ecgfxp/runner.hpp"
#include "support/synth_ecg.hpp"

using namespace ecgfxp;

TEST_CASE("reference stage DC gains settle to 36, 0, 0, 1") {
    auto lp = refdetail::make_lowpass();
    auto hp = refdetail::make_highpass();
    auto dv = refdetail::make_derivative();
    refdetail::Integrator ig;

    double lp_out = 0, hp_out = 0, dv_out = 0, ig_out = 0;
    for (int n = 0; n < 500; ++n) {
        lp_out = lp.step(1.0);
        hp_out = hp.step(1.0);
        dv_out = dv.step(1.0);
        ig_out = ig.step(1.0);
        if (n >= 64) {
            REQUIRE(std::abs(lp_out - 36.0) < 1e-9);
            REQUIRE(std::abs(hp_out - 0.0) < 1e-9);
            REQUIRE(std::abs(dv_out - 0.0) < 1e-9);
            REQUIRE(std::abs(ig_out - 1.0) < 1e-9);
        }
    }

    // the cascade through low-pass then high-pass also nulls a constant
    ReferencePipeline pipe;
    RefTap tap{};
    for (int n = 0; n < 200; ++n) tap = pipe.step(1.0);
    CHECK(std::abs(tap.sf) < 1e-9);
}

TEST_CASE("reference impulse responses equal the fixed-point ones in real units") {
    // an impulse of 1.0 at fraction 16 keeps every stage's arithmetic exact,
    // so the two independently written paths must agree bit for bit
    const FxpFormat fmt(32, 16);
    const FxpValue one = quantize(1.0, fmt);
    const FxpValue zero = fxp_zero(fmt);

    SECTION("low-pass") {
        auto ref = refdetail::make_lowpass();
        LowPassStage fixed(fmt);
        for (int n = 0; n < 40; ++n) {
            const FxpValue x = (n == 0) ? one : zero;
            CHECK(fixed.step(x).to_real() == ref.step(x.to_real()));
        }
    }
    SECTION("high-pass") {
        auto ref = refdetail::make_highpass();
        HighPassStage fixed(fmt);
        for (int n = 0; n < 80; ++n) {
            const FxpValue x = (n == 0) ? one : zero;
            CHECK(fixed.step(x).to_real() == ref.step(x.to_real()));
        }
    }
    SECTION("derivative") {
        auto ref = refdetail::make_derivative();
        DerivativeStage fixed(fmt);
        for (int n = 0; n < 20; ++n) {
            const FxpValue x = (n == 0) ? one : zero;
            CHECK(fixed.step(x).to_real() == ref.step(x.to_real()));
        }
    }
    SECTION("integrator") {
        refdetail::Integrator ref;
        IntegratorStage fixed(fmt);
        for (int n = 0; n < 80; ++n) {
            const FxpValue x = (n == 0) ? one : zero;
            CHECK(fixed.step(x).to_real() == ref.step(x.to_real()));
        }
    }
}

TEST_CASE("zero signal yields zero taps and no beats") {
    const std::vector<double> zeros(600, 0.0);
    const ReferenceRun run = run_reference(zeros, RunConfig{}, 200.0);
    REQUIRE(run.taps.size() == zeros.size());
    for (const RefTap& tap : run.taps) {
        CHECK(tap.sf == 0.0);
        CHECK(tap.si == 0.0);
    }
    CHECK(run.events.empty());
    CHECK(run.assembly.beats.empty());
    CHECK(run.assembly.warnings.empty());
}

TEST_CASE("signal shorter than the seed window is rejected") {
    const std::vector<double> s(100, 0.0);
    CHECK_THROWS_AS(run_reference(s, RunConfig{}, 200.0), std::invalid_argument);
}

TEST_CASE("synthetic trains recover the programmed heart rate") {
    SECTION("60 bpm gives hr exactly 60 after the first beat") {
        const auto [rec, ann] = synth_beats(200.0, 60.0, 1.0, 100.0, 30.0, 0.0);
        const ReferenceRun run = run_reference(rec.samples, RunConfig{}, rec.fs);
        REQUIRE(run.assembly.beats.size() == ann.beat_indices.size());
        for (size_t b = 1; b < run.assembly.beats.size(); ++b) {
            REQUIRE(run.assembly.beats[b].rr_interval_samples.has_value());
            CHECK(*run.assembly.beats[b].rr_interval_samples == 200);
            CHECK(*run.assembly.beats[b].heart_rate_bpm == 60.0);
        }
    }
    SECTION("120 bpm gives hr exactly 120") {
        const auto [rec, ann] = synth_beats(200.0, 120.0, 1.0, 100.0, 30.0, 0.0);
        const ReferenceRun run = run_reference(rec.samples, RunConfig{}, rec.fs);
        REQUIRE(run.assembly.beats.size() == ann.beat_indices.size());
        for (size_t b = 1; b < run.assembly.beats.size(); ++b) {
            CHECK(*run.assembly.beats[b].rr_interval_samples == 100);
            CHECK(*run.assembly.beats[b].heart_rate_bpm == 120.0);
        }
    }
    SECTION("72 bpm alternates between the two straddling intervals") {
        const auto [rec, ann] = synth_beats(200.0, 72.0, 1.0, 100.0, 30.0, 0.0);
        const ReferenceRun run = run_reference(rec.samples, RunConfig{}, rec.fs);
        REQUIRE(run.assembly.beats.size() == ann.beat_indices.size());
        for (size_t b = 1; b < run.assembly.beats.size(); ++b) {
            const int64_t rr = *run.assembly.beats[b].rr_interval_samples;
            CHECK((rr == 166 || rr == 167));
            // hr * rr must reproduce 60 * fs regardless of the rounding split
            CHECK(*run.assembly.beats[b].heart_rate_bpm * static_cast<double>(rr) ==
                  Catch::Approx(60.0 * 200.0).epsilon(1e-14));
        }
    }
}

TEST_CASE("reference detection is invariant under input scaling") {
    const auto [rec, ann] = synth_beats(200.0, 75.0, 1.0, 100.0, 20.0, 0.01, 11);
    const ReferenceRun base = run_reference(rec.samples, RunConfig{}, rec.fs);
    const std::vector<double> scaled = apply_scale(rec.samples, 2.5);
    const ReferenceRun big = run_reference(scaled, RunConfig{}, rec.fs);

    REQUIRE(base.events.size() == big.events.size());
    for (size_t k = 0; k < base.events.size(); ++k)
        CHECK(base.events[k].si_peak_index == big.events[k].si_peak_index);

    REQUIRE(base.assembly.beats.size() == big.assembly.beats.size());
    for (size_t k = 0; k < base.assembly.beats.size(); ++k)
        CHECK(base.assembly.beats[k].r_peak_index == big.assembly.beats[k].r_peak_index);
}

TEST_CASE("fixed and reference runs agree on a clean synthetic record") {
    const testsupport::StandinRecord standin = testsupport::make_standin(12.0);
    const PreparedSignal prep = prepare_record(standin.record, RunConfig{});
    REQUIRE(prep.fs == 200.0);

    const FixedRun fixed = run_fixed(prep.samples, RunConfig{}, prep.fs);
    const ReferenceRun ref = run_reference(prep.samples, RunConfig{}, prep.fs);

    const ComparisonReport report =
        compare_runs(fixed.taps, fixed.assembly.beats, ref, CompareTolerances{});

    INFO("max stage deviation " << report.max_stage_deviation());
    CHECK(report.stages_ok());
    CHECK(report.fixed_beat_count == report.ref_beat_count);
    CHECK(report.beats_agree());
    CHECK(report.max_beat_delta <= report.tolerances.beat_window_samples);
    CHECK(report.fixed_beat_count > 0);
}

TEST_CASE("comparison rejects runs of different length") {
    const std::vector<double> s(600, 0.0);
    const ReferenceRun ref = run_reference(s, RunConfig{}, 200.0);
    const std::vector<double> shorter(500, 0.0);
    const FixedRun fixed = run_fixed(shorter, RunConfig{}, 200.0);
    CHECK_THROWS_AS(compare_runs(fixed.taps, fixed.assembly.beats, ref, CompareTolerances{}),
                    std::invalid_argument);
}

TEST_CASE("beat matching pairs within the window and flags the rest") {
    const std::vector<uint64_t> a{100, 300, 500, 900};
    const std::vector<uint64_t> b{102, 297, 700, 901};
    size_t matched = 0;
    int max_delta = 0;
    std::vector<uint64_t> a_only, b_only;
    match_beats(a, b, 3, matched, max_delta, a_only, b_only);
    CHECK(matched == 3);
    CHECK(max_delta == 3);
    CHECK(a_only == std::vector<uint64_t>{500});
    CHECK(b_only == std::vector<uint64_t>{700});
}
