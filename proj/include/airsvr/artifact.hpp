#pragma once

#include "airsvr/preprocess.hpp"
#include "airsvr/svr.hpp"

#include <cstdint>
#include <iosfwd>
#include <map>
#include <string>

namespace airsvr {

inline constexpr int kModelFormatVersion = 1;

struct ArtifactMetadata {
    std::string target;
    std::string created_at;
    std::uint64_t seed = 0;
    std::map<std::string, std::string> search_summary;
};

// A fitted pipeline and the model trained on its output.
struct ModelArtifact {
    int format_version = kModelFormatVersion;
    PipelineState pipeline;
    SvrModel model;
    ArtifactMetadata metadata;
};

// JSON text; every double is stored as a hex float so a reload is bit exact.
std::string serialize_model(const ModelArtifact& a);
// Throws VersionError for an unknown format_version and ParseError naming the
// offending field for anything malformed or truncated.
ModelArtifact deserialize_model(const std::string& text);

void save_model(const ModelArtifact& a, const std::string& path);
ModelArtifact load_model(const std::string& path);

// Forecasts in target units for every supervised row of frame.
struct Forecast {
    std::vector<Instant> feature_times;
    std::vector<Instant> target_times;
    Vector predicted;       // de-standardized
    Vector observed;        // target at target_times
    Vector predicted_std;   // model output, standardized scale
    Vector observed_std;
};
Forecast forecast(const ModelArtifact& a, const TimeSeriesFrame& frame);

}  // namespace airsvr
