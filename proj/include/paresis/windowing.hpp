#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "paresis/tensor.hpp"

namespace paresis {

inline constexpr std::array<std::string_view, 9> kActions = {
    "brushing", "combing", "deodorant", "drinking", "face_wash",
    "feeding",  "glasses", "RTT",       "shelf"};

// -1 when the name is not in the closed set
int action_index(std::string_view name);
// Left=0, Right=1, -1 otherwise
int paretic_index(std::string_view side);

struct SubjectMeta {
    int age_years = 0;
    std::string sex;         // "F" | "M"
    std::string impairment;  // "Mild" | "Moderate" | "Severe"
    double time_since_stroke_days = 0.0;
    std::optional<int> ue_fma;  // 0..66 when present
};

struct Recording {
    std::string id;
    std::vector<std::string> channels;
    nd::Tensor samples;  // [L, F]
    double sample_rate_hz = 100.0;
    std::string paretic_side;  // "Left" | "Right"
    std::string action;
    SubjectMeta meta;

    size_t length() const { return samples.shape[0]; }
    size_t num_channels() const { return samples.shape[1]; }
};

enum class DataFormat { Csv, Jsonl };

// Reads the sample matrix from `path` and labels from the `<stem>.meta.json`
// sidecar next to it.
Recording ingest_recording(const std::string& path, DataFormat format);
Recording ingest_recording(const std::string& path);  // format from extension

// labels and subject facts only; the sample matrix stays empty
Recording read_sidecar(const std::string& sidecar_path);

struct Window {
    nd::Tensor data;  // [T, F]
    std::string source_id;
    size_t offset = 0;
    std::string paretic_side;
    std::string action;
};

// first row all zeros
using NormalizedWindow = Window;

// Offsets 0, skip, 2*skip, ...; trailing samples that cannot fill a window
// are dropped. window_len > L yields an empty list (recording too short).
std::vector<Window> slide_windows(const Recording& rec, size_t window_len, size_t skip);

NormalizedWindow normalize_window(const Window& w);

enum class Task { Paretic, Action };

size_t task_classes(Task t);
const char* task_name(Task t);
Task task_from_name(std::string_view name);

// class index of the window under the given task
int window_label(const Window& w, Task t);

struct SplitSpec {
    double train = 0.7;
    double val = 0.15;
    double test = 0.15;
    uint64_t seed = 0;
};

struct Dataset {
    Task task = Task::Paretic;
    size_t window_len = 0;
    size_t skip = 0;
    size_t num_channels = 0;
    std::vector<NormalizedWindow> train, val, test;
};

// Partitions by recording id (never by window), then slides + normalizes.
// Fractions must each lie in [0,1] and sum to 1.
Dataset build_dataset(const std::vector<Recording>& recordings, Task task,
                      size_t window_len, size_t skip, const SplitSpec& split);

}  // namespace paresis
