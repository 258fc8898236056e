#include "paresis/synthgen.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <filesystem>
#include <fstream>

#include <json.hpp>

#include "paresis/common.hpp"
#include "paresis/rng.hpp"

namespace paresis {

namespace {

constexpr double kTau = 6.283185307179586476925286766559;

struct SubjectProfile {
    std::string paretic_side;
    SubjectMeta meta;
};

// Subject-level facts stay fixed across the subject's recordings. The
// impairment band follows the generator's asymmetry setting; UE-FMA is drawn
// inside that band's range.
SubjectProfile subject_profile(const SynthSpec& spec, size_t subject) {
    Rng rng(mix_seed(spec.seed, 0x5b, subject));
    SubjectProfile p;
    p.paretic_side = subject % 2 == 0 ? "Left" : "Right";
    p.meta.age_years = rng.uniform_int(35, 85);
    p.meta.sex = rng.next_u64() & 1 ? "M" : "F";
    p.meta.time_since_stroke_days = static_cast<double>(rng.uniform_int(14, 1000));
    if (spec.asymmetry_factor >= 0.75)
        p.meta.impairment = "Mild";
    else if (spec.asymmetry_factor >= 0.45)
        p.meta.impairment = "Moderate";
    else
        p.meta.impairment = "Severe";
    if (p.meta.impairment == "Mild")
        p.meta.ue_fma = rng.uniform_int(48, 66);
    else if (p.meta.impairment == "Moderate")
        p.meta.ue_fma = rng.uniform_int(29, 47);
    else
        p.meta.ue_fma = rng.uniform_int(0, 28);
    return p;
}

std::string recording_id(size_t subject, size_t rec) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "s%03zu_r%03zu", subject, rec);
    return buf;
}

std::string fmt_double(double x) {
    char buf[32];
    auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), x);
    (void)ec;
    return std::string(buf, ptr);
}

}  // namespace

double action_frequency_hz(size_t action) { return 0.9 + 0.6 * static_cast<double>(action); }

std::vector<Recording> generate(const SynthSpec& spec) {
    if (spec.channels < 3)
        throw ConfigError("synthgen: need at least 3 channels (one per body group), got " +
                          std::to_string(spec.channels));
    if (!(spec.asymmetry_factor > 0.0) || spec.asymmetry_factor > 1.0)
        throw ConfigError("synthgen: asymmetry_factor must lie in (0, 1]");
    if (spec.noise_sigma < 0.0) throw ConfigError("synthgen: negative noise_sigma");
    if (spec.length < 2) throw ConfigError("synthgen: recording length must be at least 2");
    if (!(spec.sample_rate_hz > 0.0)) throw ConfigError("synthgen: sample rate must be positive");

    const size_t f = spec.channels;
    const size_t group = f / 3;  // [0,g) left, [g,2g) right, [2g,f) trunk
    std::vector<Recording> out;
    out.reserve(spec.n_subjects * spec.recordings_per_subject);

    for (size_t s = 0; s < spec.n_subjects; ++s) {
        SubjectProfile prof = subject_profile(spec, s);
        const bool left_paretic = prof.paretic_side == "Left";

        for (size_t r = 0; r < spec.recordings_per_subject; ++r) {
            Rng rng(mix_seed(spec.seed, s, r));
            const size_t action = r % kActions.size();
            const double freq = action_frequency_hz(action);

            // the right-side group mirrors the left-side templates so the two
            // populations match in RMS before the paretic attenuation
            std::vector<double> amp(f), phase(f);
            for (size_t c = 0; c < group; ++c) {
                amp[c] = rng.uniform(0.8, 1.2);
                phase[c] = rng.uniform(0.0, kTau);
                amp[group + c] = amp[c];
                phase[group + c] = phase[c] + kTau / 2.0;
            }
            for (size_t c = 2 * group; c < f; ++c) {
                amp[c] = 0.5 * rng.uniform(0.8, 1.2);
                phase[c] = rng.uniform(0.0, kTau);
            }

            Recording rec;
            rec.id = recording_id(s, r);
            rec.sample_rate_hz = spec.sample_rate_hz;
            rec.paretic_side = prof.paretic_side;
            rec.action = kActions[action];
            rec.meta = prof.meta;
            rec.channels.reserve(f);
            for (size_t c = 0; c < f; ++c) rec.channels.push_back("ch" + std::to_string(c + 1));

            rec.samples = nd::Tensor({spec.length, f});
            for (size_t i = 0; i < spec.length; ++i) {
                const double t = static_cast<double>(i) / spec.sample_rate_hz;
                for (size_t c = 0; c < f; ++c) {
                    const bool paretic_ch =
                        left_paretic ? c < group : (c >= group && c < 2 * group);
                    double jitter = paretic_ch ? 0.10 * rng.gaussian() : 0.0;
                    double arg = kTau * freq * t + phase[c] + jitter;
                    double v = amp[c] * (std::sin(arg) + 0.3 * std::sin(2.0 * arg + 1.0));
                    if (paretic_ch) v *= spec.asymmetry_factor;
                    rec.samples(i, c) = v + spec.noise_sigma * rng.gaussian();
                }
            }
            out.push_back(std::move(rec));
        }
    }
    return out;
}

void export_dataset(const std::vector<Recording>& recordings, const std::string& dir) {
    namespace fs = std::filesystem;
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec) throw Error("synthgen: cannot create directory '" + dir + "': " + ec.message());

    nlohmann::json manifest;
    manifest["count"] = recordings.size();
    manifest["recordings"] = nlohmann::json::array();

    for (const Recording& rec : recordings) {
        fs::path csv = fs::path(dir) / (rec.id + ".csv");
        std::ofstream out(csv);
        if (!out) throw Error("synthgen: cannot write '" + csv.string() + "'");

        out << "time";
        for (const std::string& ch : rec.channels) out << ',' << ch;
        out << '\n';
        const size_t n = rec.length(), f = rec.num_channels();
        for (size_t i = 0; i < n; ++i) {
            out << fmt_double(static_cast<double>(i) / rec.sample_rate_hz);
            for (size_t c = 0; c < f; ++c) out << ',' << fmt_double(rec.samples(i, c));
            out << '\n';
        }
        if (!out) throw Error("synthgen: write failed for '" + csv.string() + "'");

        nlohmann::json side;
        side["id"] = rec.id;
        side["paretic_side"] = rec.paretic_side;
        side["action"] = rec.action;
        side["age"] = rec.meta.age_years;
        side["sex"] = rec.meta.sex;
        side["impairment"] = rec.meta.impairment;
        side["time_since_stroke_days"] = rec.meta.time_since_stroke_days;
        if (rec.meta.ue_fma) side["ue_fma"] = *rec.meta.ue_fma;
        fs::path meta = fs::path(dir) / (rec.id + ".meta.json");
        std::ofstream mout(meta);
        if (!mout) throw Error("synthgen: cannot write '" + meta.string() + "'");
        mout << side.dump(2) << '\n';

        manifest["recordings"].push_back(rec.id);
    }

    std::ofstream mf(fs::path(dir) / "dataset.json");
    if (!mf) throw Error("synthgen: cannot write manifest in '" + dir + "'");
    mf << manifest.dump(2) << '\n';
}

std::vector<Recording> ingest_dir(const std::string& dir) {
    namespace fs = std::filesystem;
    if (!fs::is_directory(dir)) throw ParseError("'" + dir + "' is not a directory");
    std::vector<fs::path> files;
    for (const auto& entry : fs::directory_iterator(dir))
        if (entry.is_regular_file() && entry.path().extension() == ".csv")
            files.push_back(entry.path());
    std::sort(files.begin(), files.end());
    std::vector<Recording> out;
    out.reserve(files.size());
    for (const fs::path& p : files) out.push_back(ingest_recording(p.string()));
    return out;
}

}  // namespace paresis
