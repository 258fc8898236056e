#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "paresis/windowing.hpp"

namespace paresis {

// Controllable synthetic kinematics: channels split into left/right/trunk
// groups, one oscillatory signature per action, paretic-side group attenuated
// by asymmetry_factor with extra phase jitter.
struct SynthSpec {
    size_t n_subjects = 30;
    size_t recordings_per_subject = 9;  // one per action
    size_t length = 256;                // samples per recording
    size_t channels = 75;
    double sample_rate_hz = 100.0;
    double asymmetry_factor = 0.5;  // (0, 1]
    double noise_sigma = 0.1;
    uint64_t seed = 0;
};

// dominant frequency of action a, pairwise separated by 0.6 Hz; the ladder
// tops out below the Nyquist rate of the deepest stride-8 feature maps
double action_frequency_hz(size_t action);

std::vector<Recording> generate(const SynthSpec& spec);

// <id>.csv + <id>.meta.json per recording plus a dataset.json manifest;
// values serialized with shortest round-trip precision, so re-ingesting
// reproduces the sample matrix bit-exactly
void export_dataset(const std::vector<Recording>& recordings, const std::string& dir);

// every *.csv under dir (non-recursive), sorted by filename
std::vector<Recording> ingest_dir(const std::string& dir);

}  // namespace paresis
