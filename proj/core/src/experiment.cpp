#include "g2i/experiment.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <fstream>
#include <map>

#include <json.hpp>

#include "binary_io.hpp"

namespace g2i {

namespace {

using json = nlohmann::json;

template <typename F>
auto in_stage(const char* name, F&& body) -> decltype(body()) {
  try {
    return body();
  } catch (const StageError&) {
    throw;
  } catch (const std::exception& e) {
    throw StageError(name, e.what());
  }
}

void write_json(const json& document, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write '" + path.string() + "'");
  out << document.dump(2) << '\n';
}

json fit_json(const FitResult& fit, const char* unit, double reference) {
  return json{{"value", fit.value},        {"sigma", fit.sigma},          {"unit", unit},
              {"chi2", fit.chi2},          {"iterations", fit.iterations}, {"samples", fit.samples},
              {"reference", reference}};
}

std::vector<FitSample> lag_samples(const Correlogram& c) {
  std::vector<FitSample> samples;
  for (std::size_t k = 0; k < c.g2.size(); ++k) {
    if (c.g2[k] && std::isfinite(c.std_error[k]) && c.std_error[k] > 0.0) {
      samples.push_back({c.lag_ns(k), *c.g2[k], c.std_error[k]});
    }
  }
  return samples;
}

// Output context shared by the experiment bodies.
struct Run {
  const Config& config;
  const RunOptions& options;
  TimeGrid grid;
  ResultBundle& bundle;

  std::filesystem::path path(const std::string& name) const { return options.out_dir / name; }
  void record(const std::string& name) { bundle.artifacts.push_back(name); }

  BinaryWindowSet detect_and_bin(const Config& cfg, const IntensityTrace& trace, const std::vector<std::size_t>& pixels) {
    const auto events = in_stage("detect", [&] { return simulate_events(cfg, trace, pixels, options.threads); });
    return in_stage("binarize", [&] { return binarize(events, grid); });
  }

  IntensityTrace trace_for(const Config& cfg) {
    auto trace = in_stage("synthesize", [&] { return make_trace(cfg, grid, options.threads); });
    for (const auto& w : trace.warnings) bundle.warnings.push_back("synthesize: " + w);
    return trace;
  }

  void write_correlograms(const std::vector<Correlogram>& correlograms, const std::string& name) {
    in_stage("write", [&] { write_correlograms_csv(correlograms, path(name)); });
    record(name);
  }

  void note_diagnostics(const std::vector<Correlogram>& correlograms) {
    for (const auto& c : correlograms) {
      for (const auto& d : c.diagnostics) {
        bundle.warnings.push_back("correlate " + std::to_string(c.pixel_i) + "-" + std::to_string(c.pixel_j) + ": " + d);
      }
    }
  }
};

// Pixels referenced by `pairs`, in ascending order, plus their positions.
std::vector<std::size_t> referenced_pixels(const std::vector<PixelPair>& pairs) {
  std::vector<std::size_t> pixels;
  for (const auto& [i, j] : pairs) {
    pixels.push_back(i);
    pixels.push_back(j);
  }
  std::sort(pixels.begin(), pixels.end());
  pixels.erase(std::unique(pixels.begin(), pixels.end()), pixels.end());
  return pixels;
}

std::size_t position_of(const std::vector<std::size_t>& pixels, std::size_t pixel) {
  return static_cast<std::size_t>(std::lower_bound(pixels.begin(), pixels.end(), pixel) - pixels.begin());
}

void run_temporal_pair(Run& run) {
  const auto& cfg = run.config;
  const auto trace = run.trace_for(cfg);
  // Two extra copies of one pixel, appended after the sorted physical pixels,
  // form the virtual pair.
  auto pixels = referenced_pixels(cfg.run.pairs);
  const auto copy = pixels.size();
  std::vector<PixelPair> local;
  for (const auto& [i, j] : cfg.run.pairs) local.emplace_back(position_of(pixels, i), position_of(pixels, j));
  local.emplace_back(copy, copy + 1);
  pixels.insert(pixels.end(), 2, cfg.run.virtual_pixel);
  const auto bins = run.detect_and_bin(cfg, trace, pixels);
  auto correlograms = in_stage("correlate", [&] { return g2_pairs(bins, local, cfg.run.variant, nullptr, run.options.threads); });
  for (std::size_t k = 0; k < cfg.run.pairs.size(); ++k) {
    const auto [i, j] = cfg.run.pairs[k];
    correlograms[k].pixel_i = i;
    correlograms[k].pixel_j = j;
    correlograms[k].separation_um = pair_separation(cfg.geometry, i, j);
  }
  auto& virtual_pair = correlograms.back();
  virtual_pair.pixel_i = virtual_pair.pixel_j = cfg.run.virtual_pixel;
  virtual_pair.separation_um = 0.0;
  run.note_diagnostics(correlograms);

  for (std::size_t k = 0; k < cfg.run.pairs.size(); ++k) {
    const auto [i, j] = cfg.run.pairs[k];
    run.write_correlograms({correlograms[k]}, "correlogram_" + std::to_string(i) + "_" + std::to_string(j) + ".csv");
  }
  run.write_correlograms({virtual_pair}, "correlogram_virtual_" + std::to_string(cfg.run.virtual_pixel) + ".csv");

  if (cfg.source.kind == SourceKind::chaotic) {
    const double factor = 1.0 / static_cast<double>(cfg.source.branches());
    try {
      run.bundle.coherence_time = in_stage("fit", [&] { return fit_coherence_time(lag_samples(virtual_pair), factor); });
    } catch (const StageError& e) {
      run.bundle.warnings.push_back(e.what());
    }
  }
  run.bundle.correlograms = std::move(correlograms);
}

void run_spatial_row(Run& run) {
  const auto& cfg = run.config;
  const auto trace = run.trace_for(cfg);
  std::vector<std::size_t> pixels;
  for (std::size_t c = 0; c < cfg.geometry.cols; ++c) pixels.push_back(cfg.run.row * cfg.geometry.cols + c);
  if (pixels.size() < 2) throw StageError("correlate", "spatial_row needs at least two columns");
  const auto bins = run.detect_and_bin(cfg, select_pixels(trace, pixels), {});

  auto correlograms = in_stage("correlate", [&] { return g2_all_pairs(bins, cfg.run.variant, nullptr, run.options.threads); });
  const bool chaotic = cfg.source.kind == SourceKind::chaotic;
  const auto params = chaotic ? model_params(cfg.source) : ChaoticModelParams{};
  std::vector<FitSample> samples;
  for (auto& c : correlograms) {
    c.pixel_i = pixels[c.pixel_i];
    c.pixel_j = pixels[c.pixel_j];
    c.separation_um = pair_separation(cfg.geometry, c.pixel_i, c.pixel_j);
    const auto value = c.at(0);
    if (!value) continue;
    const double model = chaotic ? g2_model(params, c.separation_um, 0.0)
                                 : table1_reference(cfg.source.kind, CoherenceOrder::g2);
    run.bundle.spatial.push_back({c.pixel_i, c.pixel_j, c.separation_um, *value, c.std_error_at(0), model});
    samples.push_back({c.separation_um, *value, c.std_error_at(0)});
  }
  run.note_diagnostics(correlograms);
  run.write_correlograms(correlograms, "correlogram_row.csv");

  in_stage("write", [&] {
    std::ofstream out(run.path("spatial.csv"));
    if (!out) throw std::runtime_error("cannot write spatial.csv");
    out << "pair_i,pair_j,separation_um,g2,stderr,model_g2\n";
    for (const auto& s : run.bundle.spatial) {
      out << s.pixel_i << ',' << s.pixel_j << ',' << format_double(s.separation_um) << ',' << format_double(s.g2)
          << ',' << format_double(s.std_error) << ',' << format_double(s.model_g2) << '\n';
    }
  });
  run.record("spatial.csv");

  if (chaotic) {
    try {
      run.bundle.angular_width = in_stage("fit", [&] {
        return fit_angular_width(samples, cfg.source.wavelength_nm, params.polarization_factor);
      });
    } catch (const StageError& e) {
      run.bundle.warnings.push_back(e.what());
    }
  }
  run.bundle.correlograms = std::move(correlograms);
}

void run_full_map(Run& run) {
  const auto& cfg = run.config;
  const auto trace = run.trace_for(cfg);
  const auto bins = run.detect_and_bin(cfg, trace, {});
  auto correlograms =
      in_stage("correlate", [&] { return g2_all_pairs(bins, cfg.run.variant, &cfg.geometry, run.options.threads); });
  run.note_diagnostics(correlograms);
  run.bundle.map = in_stage("map", [&] { return zero_lag_map(correlograms, cfg.geometry.pixel_count()); });
  run.write_correlograms(correlograms, "correlogram_all.csv");
  in_stage("write", [&] {
    write_map_csv(*run.bundle.map, run.path("map.csv"));
    json meta{{"schema_version", results_schema_version},
              {"rows", cfg.geometry.rows},
              {"cols", cfg.geometry.cols},
              {"pitch_x_um", cfg.geometry.pitch_x_um},
              {"pitch_y_um", cfg.geometry.pitch_y_um},
              {"pixels", cfg.geometry.pixel_count()},
              {"pixel_order", "row-major from top-left"},
              {"diagonal_value", CorrelationMap::diagonal_value},
              {"lag_ns", 0.0},
              {"variant", to_string(cfg.run.variant)}};
    write_json(meta, run.path("map.meta.json"));
  });
  run.record("map.csv");
  run.record("map.meta.json");
  run.bundle.correlograms = std::move(correlograms);
}

void run_method_compare(Run& run) {
  const auto& cfg = run.config;
  const auto [i, j] = cfg.run.pairs.front();
  const auto trace = run.trace_for(cfg);
  const auto events = in_stage("detect", [&] { return simulate_events(cfg, trace, {i, j}, run.options.threads); });
  const auto bins = in_stage("binarize", [&] { return binarize(events, run.grid); });

  MethodComparison comparison;
  comparison.estimator = in_stage("correlate", [&] {
    return g2_pair(bins, 0, 1, cfg.run.variant, pair_separation(cfg.geometry, i, j));
  });
  comparison.estimator.pixel_i = i;
  comparison.estimator.pixel_j = j;
  run.note_diagnostics({comparison.estimator});
  in_stage("histogram", [&] {
    const auto range = static_cast<std::int64_t>(run.grid.window_N) * run.grid.bin_ps;
    comparison.histogram = start_stop_histogram(events.times_ps[0], events.times_ps[1], run.grid.bin_ps, range);
    comparison.histogram.start_channel = i;
    comparison.histogram.stop_channel = j;
    comparison.baseline_zero_lag = normalize_histogram(comparison.histogram, AnchorMode::anchor_zero_lag);
    comparison.baseline_tail = normalize_histogram(comparison.histogram, AnchorMode::anchor_tail);
  });
  comparison.mean_rate_hz = static_cast<double>(events.accepted(1)) / (static_cast<double>(events.duration_ps) * 1e-12);

  run.write_correlograms({comparison.estimator}, "compare_estimator.csv");
  in_stage("write", [&] {
    const AnchorMode modes[] = {AnchorMode::anchor_zero_lag, AnchorMode::anchor_tail};
    write_histogram_csv(comparison.histogram, modes, run.path("compare_baseline.csv"));
  });
  run.record("compare_baseline.csv");
  run.bundle.correlograms = {comparison.estimator};
  run.bundle.comparison = std::move(comparison);
}

void run_table1_suite(Run& run) {
  const auto& base = run.config;
  const SourceKind kinds[] = {SourceKind::incoherent, SourceKind::coherent, SourceKind::chaotic};
  for (std::size_t k = 0; k < std::size(kinds); ++k) {
    const auto kind = kinds[k];
    Config cfg = base;
    cfg.source.kind = kind;
    cfg.run.seed = base.run.seed + k;
    if (kind == SourceKind::chaotic) cfg.source.polarization = Polarization::polarized;
    const auto trace = run.trace_for(cfg);
    // Incoherent light is probed across two pixels; the other states at x = 0.
    std::vector<std::size_t> pixels{base.run.virtual_pixel, base.run.virtual_pixel};
    if (kind == SourceKind::incoherent) pixels = {base.run.pairs.front().first, base.run.pairs.front().second};
    const auto bins = run.detect_and_bin(cfg, trace, pixels);
    const double separation = kind == SourceKind::incoherent ? pair_separation(cfg.geometry, pixels[0], pixels[1]) : 0.0;
    auto c = in_stage("correlate", [&] { return g2_pair(bins, 0, 1, cfg.run.variant, separation); });
    c.pixel_i = pixels[0];
    c.pixel_j = pixels[1];
    run.note_diagnostics({c});
    run.write_correlograms({c}, std::string("correlogram_table1_") + to_string(kind) + ".csv");

    Table1Row row{kind,
                  table1_reference(kind, CoherenceOrder::g1),
                  table1_reference(kind, CoherenceOrder::g2),
                  0.0,
                  "field",
                  c.at(0).value_or(std::nan("")),
                  c.std_error_at(0)};
    if (kind == SourceKind::chaotic) {
      // Siegert relation for one polarization branch: |g1| = sqrt(g2 - 1).
      row.g1_proxy = std::sqrt(std::max(0.0, row.g2_measured - 1.0));
      row.g1_proxy_source = "siegert";
    } else {
      // A coherent envelope is one deterministic field shared by all pixels;
      // incoherent pixels see independent fields.
      row.g1_proxy = kind == SourceKind::coherent ? 1.0 : 0.0;
    }
    run.bundle.table1.push_back(row);
    run.bundle.correlograms.push_back(std::move(c));
  }
  in_stage("write", [&] {
    std::ofstream out(run.path("table1.csv"));
    if (!out) throw std::runtime_error("cannot write table1.csv");
    out << "kind,g1_reference,g2_reference,g1_proxy,g1_proxy_source,g2_measured,stderr\n";
    for (const auto& r : run.bundle.table1) {
      out << to_string(r.kind) << ',' << format_double(r.g1_reference) << ',' << format_double(r.g2_reference) << ','
          << format_double(r.g1_proxy) << ',' << r.g1_proxy_source << ',' << format_double(r.g2_measured) << ','
          << format_double(r.std_error) << '\n';
    }
  });
  run.record("table1.csv");
}

json summary_json(const ResultBundle& bundle) {
  json summary = json::object();
  if (bundle.comparison) {
    const auto& cmp = *bundle.comparison;
    const auto at50 = static_cast<std::size_t>(50000 / cmp.histogram.bin_ps);
    if (at50 < cmp.baseline_zero_lag.size()) {
      summary["baseline_g2_at_50ns"] = cmp.baseline_zero_lag[at50];
      summary["baseline_bias_at_50ns"] = 1.0 - cmp.baseline_zero_lag[at50];
    }
    summary["stop_rate_hz"] = cmp.mean_rate_hz;
    summary["analytic_bias_at_50ns"] = 1.0 - analytic_start_stop_bias(cmp.mean_rate_hz, 50e-9).exact;
  }
  if (bundle.map) summary["map_pixels"] = bundle.map->pixels;
  summary["correlograms"] = bundle.correlograms.size();
  return summary;
}

} // namespace

std::string config_hash(const Config& config) {
  std::uint64_t hash = 0xcbf29ce484222325ull;
  for (unsigned char ch : format_config(config)) {
    hash ^= ch;
    hash *= 0x100000001b3ull;
  }
  static constexpr char digits[] = "0123456789abcdef";
  std::string out(16, '0');
  for (int k = 15; k >= 0; --k) {
    out[static_cast<std::size_t>(k)] = digits[hash & 0xfu];
    hash >>= 4;
  }
  return out;
}

TimeGrid effective_grid(const Config& config, bool quick) {
  TimeGrid grid = config.grid;
  if (quick) grid.window_M = std::max<std::size_t>(1, grid.window_M / 100);
  return grid;
}

IntensityTrace make_trace(const Config& config, const TimeGrid& grid, unsigned threads) {
  const double duration_s = static_cast<double>(grid.acquisition_ps()) * 1e-12;
  IntensityTrace trace;
  switch (config.source.kind) {
  case SourceKind::coherent:
    trace = synth_intensity_coherent(config.geometry, grid, duration_s, config.source.mean_rate_hz);
    break;
  case SourceKind::incoherent:
    trace = synth_intensity_incoherent(config.geometry, grid, duration_s, config.source.mean_rate_hz, config.run.seed);
    break;
  case SourceKind::chaotic: {
    const auto modes = sample_modes(config.source, config.source.modes, config.run.seed);
    trace = synth_intensity(modes, config.geometry, grid, duration_s, config.source.mean_rate_hz,
                            config.source.period_samples, threads);
    break;
  }
  }
  trace.physical_flux = config.source.flux == FluxMode::physical;
  return trace;
}

EventStream simulate_events(const Config& config, const IntensityTrace& trace, const std::vector<std::size_t>& pixels,
                            unsigned threads) {
  if (pixels.empty()) return detect_events(trace, config.detector, config.run.seed, threads);
  return detect_events(select_pixels(trace, pixels), config.detector, config.run.seed, threads);
}

EventStream import_events(const std::filesystem::path& path, std::int64_t min_duration_ps) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open '" + path.string() + "'");
  detail::ByteReader reader(in);
  char magic[4];
  reader.read(magic, 4, "magic");
  if (std::string(magic, 4) != "G2EV") throw std::runtime_error("not a G2EV file (bad magic)");
  const auto version = reader.u32("version");
  if (version != 1) throw std::runtime_error("unsupported G2EV version " + std::to_string(version));
  const auto pixels = reader.u32("pixel count");
  EventStream events;
  events.times_ps.resize(pixels);
  events.candidates.assign(pixels, 0);
  events.discarded.assign(pixels, 0);
  std::int64_t last_event = -1;
  for (std::uint32_t p = 0; p < pixels; ++p) {
    const auto count = reader.u64("event count");
    auto& times = events.times_ps[p];
    times.reserve(static_cast<std::size_t>(std::min<std::uint64_t>(count, 1u << 24)));
    for (std::uint64_t k = 0; k < count; ++k) {
      const auto raw = reader.u64("timestamp");
      if (raw > static_cast<std::uint64_t>(INT64_MAX)) {
        throw std::runtime_error("pixel " + std::to_string(p) + " record " + std::to_string(k) + ": timestamp overflows");
      }
      const auto t = static_cast<std::int64_t>(raw);
      if (!times.empty() && t <= times.back()) {
        throw std::runtime_error("pixel " + std::to_string(p) + " record " + std::to_string(k) +
                                 ": timestamp not strictly increasing");
      }
      times.push_back(t);
    }
    events.candidates[p] = times.size();
    if (!times.empty()) last_event = std::max(last_event, times.back());
  }
  events.duration_ps = std::max(last_event + 1, min_duration_ps);
  return events;
}

void write_manifest(const ResultBundle& bundle, const Config& config, const RunOptions& options,
                    const std::string& status, const std::string& failed_stage, const std::string& error) {
  json manifest{{"schema_version", results_schema_version},
                {"tool", "g2imager"},
                {"version", bundle.version},
                {"status", status},
                {"experiment", to_string(bundle.experiment)},
                {"seed", bundle.seed},
                {"config_hash", bundle.config_hash},
                {"windows", bundle.windows},
                {"quick", options.quick},
                {"variant", to_string(config.run.variant)},
                {"window_gaps", "contiguous"},
                {"wall_time_s", bundle.wall_time_s},
                {"artifacts", bundle.artifacts},
                {"warnings", bundle.warnings},
                {"summary", summary_json(bundle)}};
  if (!failed_stage.empty()) {
    manifest["failed_stage"] = failed_stage;
    manifest["error"] = error;
  }
  write_json(manifest, options.out_dir / "manifest.json");
}

ResultBundle run_experiment(const Config& config, const RunOptions& options) {
  const auto started = std::chrono::steady_clock::now();
  ResultBundle bundle;
  bundle.seed = config.run.seed;
  bundle.experiment = config.run.experiment;
  bundle.config_hash = config_hash(config);
  Run run{config, options, effective_grid(config, options.quick), bundle};
  bundle.windows = run.grid.window_M;

  auto elapsed = [&] {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();
  };
  try {
    in_stage("setup", [&] {
      config.validate();
      std::filesystem::create_directories(options.out_dir);
      save_config(config, run.path("config.cfg"));
    });
    run.record("config.cfg");
    switch (config.run.experiment) {
    case ExperimentKind::temporal_pair: run_temporal_pair(run); break;
    case ExperimentKind::spatial_row: run_spatial_row(run); break;
    case ExperimentKind::full_map: run_full_map(run); break;
    case ExperimentKind::method_compare: run_method_compare(run); break;
    case ExperimentKind::table1_suite: run_table1_suite(run); break;
    }
    if (bundle.angular_width || bundle.coherence_time) {
      in_stage("write", [&] {
        json fits{{"schema_version", results_schema_version}};
        const auto params = model_params(config.source);
        if (bundle.angular_width) fits["angular_width"] = fit_json(*bundle.angular_width, "rad", config.source.angular_width_rad);
        if (bundle.coherence_time) fits["coherence_time"] = fit_json(*bundle.coherence_time, "ns", params.coherence_time_ns);
        write_json(fits, run.path("fit.json"));
      });
      run.record("fit.json");
    }
  } catch (const StageError& e) {
    bundle.wall_time_s = elapsed();
    if (std::filesystem::is_directory(options.out_dir)) {
      try {
        write_manifest(bundle, config, options, "failed", e.stage(), e.what());
      } catch (const std::exception&) {
        // The stage error is the one worth reporting.
      }
    }
    throw;
  }
  bundle.wall_time_s = elapsed();
  in_stage("write", [&] { write_manifest(bundle, config, options, "ok"); });
  return bundle;
}

} // namespace g2i
