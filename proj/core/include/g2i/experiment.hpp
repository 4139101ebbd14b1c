#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "g2i/baseline.hpp"
#include "g2i/config.hpp"
#include "g2i/correlator.hpp"
#include "g2i/field_synth.hpp"
#include "g2i/model.hpp"
#include "g2i/spad.hpp"

namespace g2i {

inline constexpr const char* library_version = "0.1.0";
inline constexpr int results_schema_version = 1;

/// A pipeline stage failed; `stage()` names it.
class StageError : public std::runtime_error {
public:
  StageError(std::string stage, const std::string& what)
      : std::runtime_error(stage + ": " + what), stage_(std::move(stage)) {}
  const std::string& stage() const noexcept { return stage_; }

private:
  std::string stage_;
};

struct RunOptions {
  std::filesystem::path out_dir;
  unsigned threads = 1;
  /// Scales the window count M down 100x for smoke runs.
  bool quick = false;
};

struct SpatialSample {
  std::size_t pixel_i;
  std::size_t pixel_j;
  double separation_um;
  double g2;
  double std_error;
  double model_g2;
};

struct MethodComparison {
  Correlogram estimator;
  StartStopHistogram histogram;
  std::vector<double> baseline_zero_lag;
  std::vector<double> baseline_tail;
  double mean_rate_hz = 0.0;
};

struct Table1Row {
  SourceKind kind;
  double g1_reference;
  double g2_reference;
  double g1_proxy;
  std::string g1_proxy_source; ///< "field" (from the synthesized field) or "siegert"
  double g2_measured;
  double std_error;
};

struct ResultBundle {
  std::uint64_t seed = 0;
  std::string config_hash;
  std::string version = library_version;
  ExperimentKind experiment = ExperimentKind::temporal_pair;
  std::size_t windows = 0;
  double wall_time_s = 0.0;

  std::vector<Correlogram> correlograms;
  std::optional<CorrelationMap> map;
  std::vector<SpatialSample> spatial;
  std::optional<FitResult> angular_width;
  std::optional<FitResult> coherence_time;
  std::optional<MethodComparison> comparison;
  std::vector<Table1Row> table1;

  std::vector<std::string> artifacts; ///< file names relative to the output directory
  std::vector<std::string> warnings;
};

/// FNV-1a 64 of the canonical config text, as 16 hex digits.
std::string config_hash(const Config& config);

/// Grid actually used for a run (quick mode divides M by 100).
TimeGrid effective_grid(const Config& config, bool quick);

/// Envelopes for every pixel of the configured array, long enough for the
/// grid's M windows.
IntensityTrace make_trace(const Config& config, const TimeGrid& grid, unsigned threads);

/// Detected events for the chosen envelope pixels (duplicates give
/// co-located virtual detectors).
EventStream simulate_events(const Config& config, const IntensityTrace& trace, const std::vector<std::size_t>& pixels,
                            unsigned threads);

/// Reads a G2EV file, enforcing strict monotonicity. The format has no
/// duration field: the stream lasts until one picosecond past its last event,
/// or `min_duration_ps` if that is longer.
EventStream import_events(const std::filesystem::path& path, std::int64_t min_duration_ps = 0);

/// Runs the configured experiment and writes its artifacts plus
/// manifest.json into options.out_dir. Failures raise StageError after a
/// partial manifest has been written.
ResultBundle run_experiment(const Config& config, const RunOptions& options);

/// Writes manifest.json for `bundle`.
void write_manifest(const ResultBundle& bundle, const Config& config, const RunOptions& options,
                    const std::string& status, const std::string& failed_stage = {},
                    const std::string& error = {});

} // namespace g2i
