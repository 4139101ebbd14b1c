#include "g2i/cli.hpp"

#include <fstream>
#include <iostream>
#include <optional>

#include <CLI11.hpp>
#include <json.hpp>

#include "g2i/experiment.hpp"
#include "g2i/parallel.hpp"

namespace g2i {

namespace {

struct GlobalOptions {
  std::string config_path;
  std::optional<std::uint64_t> seed;
  std::string out_dir = "results";
  std::string variant;
  unsigned threads = 1;
  bool quick = false;
};

/// Thrown for argument combinations CLI11 cannot check on its own.
struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

Config load(const GlobalOptions& g) {
  Config config = g.config_path.empty() ? Config{} : load_config(g.config_path);
  if (g.seed) config.run.seed = *g.seed;
  if (!g.variant.empty()) config.run.variant = parse_variant(g.variant);
  config.validate();
  return config;
}

RunOptions run_options(const GlobalOptions& g) {
  return RunOptions{g.out_dir, resolve_threads(g.threads), g.quick};
}

void print_bundle(const ResultBundle& bundle, const RunOptions& options) {
  std::cout << to_string(bundle.experiment) << ": seed " << bundle.seed << ", config " << bundle.config_hash << ", "
            << bundle.windows << " windows, " << format_double(bundle.wall_time_s) << " s\n";
  for (const auto& c : bundle.correlograms) {
    if (bundle.correlograms.size() > 8) break;
    if (c.g2.empty()) continue;
    const auto g0 = c.at(0);
    std::cout << "  pair " << c.pixel_i << "-" << c.pixel_j << " (" << format_double(c.separation_um)
              << " um): g2(0) = " << (g0 ? format_double(*g0) : "n/a") << " +- " << format_double(c.std_error_at(0))
              << '\n';
  }
  if (bundle.correlograms.size() > 8) std::cout << "  " << bundle.correlograms.size() << " pairs correlated\n";
  if (bundle.angular_width) {
    std::cout << "  angular width: " << format_double(bundle.angular_width->value) << " +- "
              << format_double(bundle.angular_width->sigma) << " rad\n";
  }
  if (bundle.coherence_time) {
    std::cout << "  coherence time: " << format_double(bundle.coherence_time->value) << " +- "
              << format_double(bundle.coherence_time->sigma) << " ns\n";
  }
  for (const auto& row : bundle.table1) {
    std::cout << "  " << to_string(row.kind) << ": g2(0) = " << format_double(row.g2_measured) << " +- "
              << format_double(row.std_error) << " (reference " << format_double(row.g2_reference) << ")\n";
  }
  for (const auto& w : bundle.warnings) std::cerr << "warning: " << w << '\n';
  std::cout << "wrote " << bundle.artifacts.size() + 1 << " files to " << options.out_dir.string() << '\n';
}

int run_with(Config config, const GlobalOptions& g, std::optional<ExperimentKind> kind) {
  if (kind) config.run.experiment = *kind;
  const auto options = run_options(g);
  print_bundle(run_experiment(config, options), options);
  return exit_ok;
}

std::vector<PixelPair> pairs_for(const std::string& text, const Config& config, std::size_t pixels) {
  if (text.empty()) return config.run.pairs;
  if (text == "all") return all_pairs(pixels);
  return parse_pairs(text);
}

int do_simulate(const GlobalOptions& g, const std::string& pixel_text, bool with_trace) {
  const auto config = load(g);
  const auto grid = effective_grid(config, g.quick);
  const auto threads = resolve_threads(g.threads);
  std::vector<std::size_t> pixels;
  if (!pixel_text.empty()) {
    std::stringstream in(pixel_text);
    std::string item;
    while (std::getline(in, item, ',')) {
      std::size_t used = 0;
      const auto value = std::stoull(item, &used);
      if (used != item.size()) throw UsageError("bad pixel index '" + item + "'");
      pixels.push_back(static_cast<std::size_t>(value));
    }
  }
  const auto trace = make_trace(config, grid, threads);
  const auto events = simulate_events(config, trace, pixels, threads);
  std::filesystem::create_directories(g.out_dir);
  const auto out = std::filesystem::path(g.out_dir);
  write_events(events, out / "events.g2ev");
  if (with_trace) write_trace(pixels.empty() ? trace : select_pixels(trace, pixels), out / "trace.g2it");
  save_config(config, out / "config.cfg");
  for (const auto& w : trace.warnings) std::cerr << "warning: " << w << '\n';
  for (std::size_t p = 0; p < events.pixel_count(); ++p) {
    std::cout << "pixel " << (pixels.empty() ? p : pixels[p]) << ": " << events.accepted(p) << " events ("
              << events.discarded[p] << " lost to dead time)\n";
  }
  std::cout << "wrote " << (out / "events.g2ev").string() << '\n';
  return exit_ok;
}

int do_correlate(const GlobalOptions& g, const std::string& events_path, const std::string& pair_text) {
  const auto config = load(g);
  const auto grid = effective_grid(config, g.quick);
  const auto events = import_events(events_path, grid.acquisition_ps());
  const auto bins = binarize(events, grid);
  const auto pairs = pairs_for(pair_text, config, bins.pixel_count());
  for (const auto& [i, j] : pairs) {
    if (i >= bins.pixel_count() || j >= bins.pixel_count()) {
      throw UsageError("pair " + std::to_string(i) + "-" + std::to_string(j) + " outside the " +
                       std::to_string(bins.pixel_count()) + " pixels of " + events_path);
    }
  }
  const ArrayGeometry* geometry = bins.pixel_count() == config.geometry.pixel_count() ? &config.geometry : nullptr;
  const auto correlograms = g2_pairs(bins, pairs, config.run.variant, geometry, resolve_threads(g.threads));
  std::filesystem::create_directories(g.out_dir);
  const auto path = std::filesystem::path(g.out_dir) / "correlograms.csv";
  write_correlograms_csv(correlograms, path);
  for (const auto& c : correlograms) {
    for (const auto& d : c.diagnostics) std::cerr << "diagnostic: " << d << '\n';
    if (c.g2.empty()) continue;
    const auto g0 = c.at(0);
    std::cout << "pair " << c.pixel_i << "-" << c.pixel_j << " " << to_string(c.variant)
              << ": g2(0) = " << (g0 ? format_double(*g0) : "n/a") << " +- " << format_double(c.std_error_at(0))
              << '\n';
  }
  std::cout << "wrote " << path.string() << '\n';
  return exit_ok;
}

int do_histogram(const GlobalOptions& g, const std::string& events_path, std::optional<std::size_t> start,
                 std::optional<std::size_t> stop, std::optional<double> bin_ns, std::optional<double> range_ns) {
  const auto config = load(g);
  const auto events = import_events(events_path);
  const auto start_channel = start.value_or(config.run.pairs.front().first);
  const auto stop_channel = stop.value_or(config.run.pairs.front().second);
  if (start_channel >= events.pixel_count() || stop_channel >= events.pixel_count()) {
    throw UsageError("channel outside the " + std::to_string(events.pixel_count()) + " pixels of " + events_path);
  }
  const auto bin_ps = bin_ns ? static_cast<std::int64_t>(std::llround(*bin_ns * 1e3)) : config.grid.bin_ps;
  const auto range_ps = range_ns ? static_cast<std::int64_t>(std::llround(*range_ns * 1e3))
                                 : static_cast<std::int64_t>(config.grid.window_N) * config.grid.bin_ps;
  auto h = start_stop_histogram(events.times_ps[start_channel], events.times_ps[stop_channel], bin_ps, range_ps);
  h.start_channel = start_channel;
  h.stop_channel = stop_channel;
  std::filesystem::create_directories(g.out_dir);
  const auto path = std::filesystem::path(g.out_dir) / "histogram.csv";
  const AnchorMode modes[] = {AnchorMode::anchor_zero_lag, AnchorMode::anchor_tail};
  write_histogram_csv(h, modes, path);
  std::cout << "histogram " << start_channel << "->" << stop_channel << ": " << h.total_counts() << " of "
            << h.total_starts << " starts paired\n";
  std::cout << "wrote " << path.string() << '\n';
  return exit_ok;
}

int do_fit(const GlobalOptions& g, const std::string& input, const std::string& target, const std::string& pair_text) {
  const auto config = load(g);
  const auto correlograms = read_correlograms_csv(input);
  if (correlograms.empty()) throw std::runtime_error(input + " holds no correlograms");
  const auto params = model_params(config.source);
  nlohmann::json doc{{"schema_version", results_schema_version}, {"input", input}};
  FitResult fit;
  if (target == "angular_width") {
    std::vector<FitSample> samples;
    for (const auto& c : correlograms) {
      const auto g0 = c.at(0);
      if (g0 && c.separation_um > 0.0) samples.push_back({c.separation_um, *g0, c.std_error_at(0)});
    }
    fit = fit_angular_width(samples, config.source.wavelength_nm, params.polarization_factor);
  } else {
    const Correlogram* chosen = &correlograms.front();
    if (!pair_text.empty()) {
      const auto pair = parse_pairs(pair_text);
      if (pair.size() != 1) throw UsageError("--pair takes exactly one pair");
      chosen = nullptr;
      for (const auto& c : correlograms) {
        if (c.pixel_i == pair[0].first && c.pixel_j == pair[0].second) chosen = &c;
      }
      if (!chosen) throw std::runtime_error("pair " + pair_text + " not found in " + input);
    }
    std::vector<FitSample> samples;
    for (std::size_t k = 0; k < chosen->lag_count(); ++k) {
      if (chosen->g2[k] && chosen->std_error[k] > 0.0) samples.push_back({chosen->lag_ns(k), *chosen->g2[k], chosen->std_error[k]});
    }
    fit = fit_coherence_time(samples, params.polarization_factor);
  }
  doc[target] = {{"value", fit.value},   {"sigma", fit.sigma},           {"unit", target == "angular_width" ? "rad" : "ns"},
                 {"chi2", fit.chi2},     {"iterations", fit.iterations}, {"samples", fit.samples}};
  std::filesystem::create_directories(g.out_dir);
  const auto path = std::filesystem::path(g.out_dir) / "fit.json";
  std::ofstream(path) << doc.dump(2) << '\n';
  std::cout << target << " = " << format_double(fit.value) << " +- " << format_double(fit.sigma) << " ("
            << fit.samples << " samples)\n";
  std::cout << "wrote " << path.string() << '\n';
  return exit_ok;
}

int do_map(const GlobalOptions& g, const std::string& input) {
  const auto config = load(g);
  if (input.empty()) return run_with(config, g, ExperimentKind::full_map);
  const auto map = zero_lag_map(read_correlograms_csv(input), config.geometry.pixel_count());
  std::filesystem::create_directories(g.out_dir);
  const auto path = std::filesystem::path(g.out_dir) / "map.csv";
  write_map_csv(map, path);
  std::cout << "wrote " << path.string() << '\n';
  return exit_ok;
}

} // namespace

int cli_main(const std::vector<std::string>& args) {
  CLI::App app{"g2imager: SPAD-array intensity-correlation (g2) imager simulator"};
  app.require_subcommand(1);
  app.set_version_flag("--version", library_version);

  GlobalOptions g;
  std::uint64_t seed = 0;
  auto* config_opt = app.add_option("-c,--config", g.config_path, "configuration file (key = value lines)")
                         ->check(CLI::ExistingFile);
  auto* seed_opt = app.add_option("-s,--seed", seed, "override run.seed");
  app.add_option("-o,--out", g.out_dir, "output directory")->capture_default_str();
  app.add_option("--variant", g.variant, "estimator normalization: global or per_window")
      ->check(CLI::IsMember({"global", "per_window"}));
  app.add_option("-j,--threads", g.threads, "worker threads (0 = all cores)")->capture_default_str();
  app.add_flag("--quick", g.quick, "divide the window count M by 100 for smoke runs");
  (void)config_opt;

  auto* simulate = app.add_subcommand("simulate", "synthesize envelopes and detect events into events.g2ev");
  std::string pixel_text;
  bool with_trace = false;
  simulate->add_option("--pixels", pixel_text, "comma-separated pixel indices (default: all; repeats allowed)");
  simulate->add_flag("--trace", with_trace, "also write the intensity block to trace.g2it");

  auto* correlate = app.add_subcommand("correlate", "correlate a G2EV event file into correlograms.csv");
  std::string events_path;
  std::string pair_text;
  correlate->add_option("-e,--events", events_path, "G2EV event file")->required()->check(CLI::ExistingFile);
  correlate->add_option("-p,--pairs", pair_text, "pairs as 'i-j,k-l' or 'all' (default: run.pairs)");

  auto* histogram = app.add_subcommand("histogram", "start-stop histogram of a G2EV file into histogram.csv");
  std::optional<std::size_t> start;
  std::optional<std::size_t> stop;
  std::optional<double> bin_ns;
  std::optional<double> range_ns;
  histogram->add_option("-e,--events", events_path, "G2EV event file")->required()->check(CLI::ExistingFile);
  histogram->add_option("--start", start, "start channel (default: first pair's first pixel)");
  histogram->add_option("--stop", stop, "stop channel (default: first pair's second pixel)");
  histogram->add_option("--bin-ns", bin_ns, "histogram bin width in ns (default: grid.bin_T_ns)");
  histogram->add_option("--range-ns", range_ns, "delay range in ns (default: N * T)");

  auto* fit = app.add_subcommand("fit", "fit the chaotic-light model to a correlogram CSV into fit.json");
  std::string input;
  std::string target = "coherence_time";
  fit->add_option("-i,--input", input, "correlogram CSV")->required()->check(CLI::ExistingFile);
  fit->add_option("--target", target, "angular_width (lag-0 values vs separation) or coherence_time (lags of one pair)")
      ->check(CLI::IsMember({"angular_width", "coherence_time"}))
      ->capture_default_str();
  fit->add_option("-p,--pair", pair_text, "pair for coherence_time as 'i-j' (default: first in file)");

  auto* map = app.add_subcommand("map", "zero-lag correlation map (runs full_map, or reads --input)");
  map->add_option("-i,--input", input, "correlogram CSV holding all pairs")->check(CLI::ExistingFile);

  auto* compare = app.add_subcommand("compare", "estimator vs start-stop baseline on the first configured pair");

  auto* run = app.add_subcommand("run", "run the full pipeline for the configured experiment");
  std::string experiment;
  run->add_option("--experiment", experiment, "override run.experiment")
      ->check(CLI::IsMember({"temporal_pair", "spatial_row", "full_map", "method_compare", "table1_suite"}));

  for (auto* sub : app.get_subcommands({})) sub->fallthrough();

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? exit_ok : exit_usage;
  }
  if (*seed_opt) g.seed = seed;

  try {
    if (*simulate) return do_simulate(g, pixel_text, with_trace);
    if (*correlate) return do_correlate(g, events_path, pair_text);
    if (*histogram) return do_histogram(g, events_path, start, stop, bin_ns, range_ns);
    if (*fit) return do_fit(g, input, target, pair_text);
    if (*map) return do_map(g, input);
    if (*compare) return run_with(load(g), g, ExperimentKind::method_compare);
    if (*run) {
      std::optional<ExperimentKind> kind;
      if (!experiment.empty()) kind = parse_experiment_kind(experiment);
      return run_with(load(g), g, kind);
    }
  } catch (const UsageError& e) {
    std::cerr << "usage error: " << e.what() << '\n';
    return exit_usage;
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return exit_runtime;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return exit_runtime;
  }
  return exit_usage;
}

int cli_main(int argc, char** argv) {
  std::vector<std::string> args;
  for (int k = 1; k < argc; ++k) args.emplace_back(argv[k]);
  return cli_main(args);
}

} // namespace g2i
