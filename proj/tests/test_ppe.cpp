#include <doctest.h>

#include "helpers.hpp"
#include "sefvc/ppe.hpp"

using namespace sefvc;

TEST_CASE("pitch tracker locks onto a pure tone within 5%") {
    for (double f0 : {120.0, 220.0, 330.0}) {
        Waveform w = testutil::sine_wave(f0, 1.0);
        ProsodyTrack p = extract_ppe(w);
        REQUIRE(p.frames() == 50);
        int voiced = 0;
        for (int t = 2; t < p.frames() - 2; ++t) {  // interior frames, full windows
            if (p.pitch[t] > 0.0) {
                ++voiced;
                CHECK(std::abs(p.pitch[t] - f0) / f0 < 0.05);
                CHECK(p.pov[t] > 0.9);
            }
        }
        CHECK(voiced > p.frames() - 10);
    }
}

TEST_CASE("octave errors are suppressed: 120 Hz is not reported as 60 Hz") {
    // both 120 Hz and its octave-down 60 Hz lie inside the search range;
    // the shortest-strong-lag rule must pick the true period
    Waveform w = testutil::sine_wave(120.0, 1.0);
    ProsodyTrack p = extract_ppe(w);
    for (int t = 2; t < p.frames() - 2; ++t)
        if (p.pitch[t] > 0.0) CHECK(p.pitch[t] > 100.0);
}

TEST_CASE("silence is unvoiced with zero energy") {
    Waveform w;
    w.samples.assign(16000, 0.0);
    ProsodyTrack p = extract_ppe(w);
    for (int t = 0; t < p.frames(); ++t) {
        CHECK(p.pitch[t] == 0.0);
        CHECK(p.pov[t] == 0.0);
        CHECK(p.energy[t] == 0.0);
    }
}

TEST_CASE("white noise is mostly unvoiced") {
    Waveform w = testutil::noise_wave(2.0, 77);
    ProsodyTrack p = extract_ppe(w);
    int unvoiced = 0;
    for (int t = 0; t < p.frames(); ++t)
        if (p.pitch[t] == 0.0) ++unvoiced;
    CHECK(unvoiced >= p.frames() * 9 / 10);
}

TEST_CASE("pitch and voicing are amplitude invariant; energy scales linearly") {
    Waveform w = testutil::sine_wave(220.0, 0.8, 0.8);
    Waveform half = w;
    for (auto& s : half.samples) s *= 0.5;
    ProsodyTrack a = extract_ppe(w);
    ProsodyTrack b = extract_ppe(half);
    REQUIRE(a.frames() == b.frames());
    for (int t = 0; t < a.frames(); ++t) {
        CHECK(b.pitch[t] == doctest::Approx(a.pitch[t]).epsilon(1e-9));
        CHECK(b.pov[t] == doctest::Approx(a.pov[t]).epsilon(1e-9));
        CHECK(b.energy[t] == doctest::Approx(0.5 * a.energy[t]).epsilon(1e-9));
    }
}

TEST_CASE("prosody extraction is deterministic") {
    Waveform w = testutil::speech_like(1.0, 5);
    ProsodyTrack a = extract_ppe(w);
    ProsodyTrack b = extract_ppe(w);
    CHECK(a.pitch == b.pitch);
    CHECK(a.pov == b.pov);
    CHECK(a.energy == b.energy);
}

TEST_CASE("frame count and guards") {
    Waveform w = testutil::sine_wave(220.0, 0.1);  // 1600 samples -> 5 frames at 320 hop
    CHECK(extract_ppe(w).frames() == 5);
    Waveform tiny;
    tiny.samples.assign(100, 0.1);
    CHECK_THROWS_AS(extract_ppe(tiny), std::invalid_argument);
}

TEST_CASE("pitch feature is log1p on voiced frames and 0 otherwise") {
    CHECK(pitch_to_feature(0.0) == 0.0);
    CHECK(pitch_to_feature(-1.0) == 0.0);
    CHECK(pitch_to_feature(220.0) == doctest::Approx(std::log1p(220.0)).epsilon(1e-15));
}
