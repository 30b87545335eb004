#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <sstream>

#include <CLI11.hpp>

#include "bnav/eval/config.hpp"
#include "bnav/eval/experiments.hpp"
#include "bnav/eval/metrics.hpp"
#include "bnav/eval/svg.hpp"
#include "bnav/map/classifier.hpp"
#include "bnav/map/topo.hpp"
#include "bnav/nn/model.hpp"
#include "bnav/train/trainer.hpp"

namespace fs = std::filesystem;
using namespace bnav;

namespace {

eval::ExperimentConfig load_cfg(const std::string& path) {
  return path.empty() ? eval::parse_config("{}") : eval::load_config(path);
}

// --out flag beats the BNAV_OUT env var beats the config's out_dir
std::string resolve_out(const std::string& flag_out, const eval::ExperimentConfig& cfg) {
  if (!flag_out.empty()) return flag_out;
  if (const char* env = std::getenv("BNAV_OUT"); env && *env) return env;
  return cfg.out_dir;
}

void write_run_info(const std::string& dir, const std::string& command,
                    const eval::ExperimentConfig& cfg) {
  fs::create_directories(dir);
  eval::write_snapshot(dir, cfg);
  std::ofstream os(dir + "/run.txt");
  os << kVersionTag << "\ncommand: " << command << "\nmaster_seed: "
     << cfg.master_seed << "\n";
  if (!os) throw IoError("cannot write run info: " + dir);
}

nn::CbeModel<float> load_model(const std::string& path) {
  nn::CbeModel<float> model;
  nn::load_checkpoint(path, &model.params());
  return model;
}

void print_table(const eval::MetricsTable& t) {
  std::cout << t.title << "\n";
  for (const auto& r : t.rows) {
    std::cout << "  " << r.condition << ": " << r.successes << "/" << r.trials
              << " = " << r.rate << " [" << r.ci_lo << ", " << r.ci_hi << "]";
    if (!std::isnan(r.mean_steps)) std::cout << "  steps " << r.mean_steps;
    if (!std::isnan(r.memory_bytes)) std::cout << "  bytes " << r.memory_bytes;
    std::cout << "\n";
  }
}

void save_table(const eval::MetricsTable& t, const std::string& dir,
                const std::string& command, const eval::ExperimentConfig& cfg) {
  write_run_info(dir, command, cfg);
  t.write_csv(dir + "/metrics.csv");
  print_table(t);
  std::cout << "wrote " << dir << "/metrics.csv\n";
}

void write_epoch_log(const std::string& path,
                     const std::vector<train::EpochStats>& log) {
  std::ofstream os(path);
  if (!os) throw IoError("cannot open training log: " + path);
  os << "epoch,loss,wp_se,phi_se,lr\n";
  os.precision(17);
  for (const auto& e : log)
    os << e.epoch << ',' << e.loss << ',' << e.wp_se << ',' << e.phi_se << ','
       << e.lr << '\n';
}

// ---------------------------------------------------------------------------
// report rendering

struct LoadedTable {
  std::string name;
  eval::MetricsTable table;
};

std::vector<LoadedTable> scan_results(const std::string& root) {
  std::vector<LoadedTable> out;
  const char* names[] = {"single", "obstacle", "noise", "follow", "mapping"};
  for (const char* n : names) {
    std::string p = root + "/" + n + "/metrics.csv";
    if (fs::exists(p)) out.push_back({n, eval::MetricsTable::read_csv(p)});
  }
  return out;
}

// rows like "len16/full": series keyed by the part after the first '/'
eval::LinePlot plot_by_variant(const eval::MetricsTable& t, const std::string& title,
                               const std::string& x_label) {
  std::map<std::string, eval::Series> series;
  for (const auto& r : t.rows) {
    auto slash = r.condition.find('/');
    std::string key = slash == std::string::npos
                          ? std::string("success")
                          : r.condition.substr(slash + 1);
    eval::Series& s = series[key];
    s.label = key;
    s.x.push_back(r.extra);
    s.y.push_back(r.rate);
    s.lo.push_back(r.ci_lo);
    s.hi.push_back(r.ci_hi);
  }
  eval::LinePlot plot;
  plot.title = title;
  plot.x_label = x_label;
  plot.y_label = "success rate";
  plot.y_unit = true;
  for (auto& [k, s] : series) plot.series.push_back(std::move(s));
  return plot;
}

eval::LinePlot plot_simple(const eval::MetricsTable& t, const std::string& title,
                           const std::string& x_label) {
  eval::Series s;
  s.label = "success";
  for (const auto& r : t.rows) {
    s.x.push_back(r.extra);
    s.y.push_back(r.rate);
    s.lo.push_back(r.ci_lo);
    s.hi.push_back(r.ci_hi);
  }
  eval::LinePlot plot;
  plot.title = title;
  plot.x_label = x_label;
  plot.y_label = "success rate";
  plot.y_unit = true;
  plot.series.push_back(std::move(s));
  return plot;
}

// noise rows use the scale as the x axis, not the extra column
eval::LinePlot plot_noise(const eval::MetricsTable& t) {
  eval::Series s;
  s.label = "success";
  for (const auto& r : t.rows) {
    s.x.push_back(std::stod(r.condition.substr(1)));
    s.y.push_back(r.rate);
    s.lo.push_back(r.ci_lo);
    s.hi.push_back(r.ci_hi);
  }
  eval::LinePlot plot;
  plot.title = "actuation-noise robustness";
  plot.x_label = "noise scale s";
  plot.y_label = "success rate";
  plot.y_unit = true;
  plot.series.push_back(std::move(s));
  return plot;
}

eval::LinePlot plot_follow(const eval::MetricsTable& t) {
  eval::Series full, noattr, single;
  full.label = "segmented";
  noattr.label = "no-attractor";
  single.label = "single embedding";
  for (const auto& r : t.rows) {
    eval::Series* s = &full;
    if (r.condition == "single") s = &single;
    else if (r.condition.find("no-attractor") != std::string::npos) s = &noattr;
    s->x.push_back(r.extra);
    s->y.push_back(r.rate);
    s->lo.push_back(r.ci_lo);
    s->hi.push_back(r.ci_hi);
  }
  eval::LinePlot plot;
  plot.title = "long-route success vs compression";
  plot.x_label = "compression ratio (source steps / behavior)";
  plot.y_label = "success rate";
  plot.y_unit = true;
  plot.series = {full, noattr, single};
  return plot;
}

// pool connectivity across worlds per (variant, fraction)
eval::LinePlot plot_mapping(const eval::MetricsTable& t) {
  std::map<std::string, std::map<double, std::pair<int, int>>> acc;  // var -> frac -> (succ, trials)
  for (const auto& r : t.rows) {
    if (r.condition.find("/conn/") == std::string::npos) continue;
    std::string var = r.condition.find("/choice/") != std::string::npos
                          ? "choice points" : "fixed distance";
    auto& cell = acc[var][r.extra];
    cell.first += r.successes;
    cell.second += r.trials;
  }
  eval::LinePlot plot;
  plot.title = "map connectivity vs demonstration fraction";
  plot.x_label = "fraction of pairwise demonstrations";
  plot.y_label = "connectivity";
  plot.y_unit = true;
  for (auto& [var, cells] : acc) {
    eval::Series s;
    s.label = var;
    for (auto& [frac, cell] : cells) {
      eval::Interval iv = eval::wilson95(cell.first, cell.second);
      s.x.push_back(frac);
      s.y.push_back(eval::success_fraction(cell.first, cell.second));
      s.lo.push_back(iv.lo);
      s.hi.push_back(iv.hi);
    }
    plot.series.push_back(std::move(s));
  }
  return plot;
}

void write_summary_md(const std::string& path, const std::vector<LoadedTable>& tables) {
  std::ofstream os(path);
  if (!os) throw IoError("cannot write summary: " + path);
  os << "# Experiment summary\n";
  for (const auto& lt : tables) {
    os << "\n## " << lt.table.title << "\n\n";
    os << "| condition | trials | successes | rate | 95% CI | mean steps | bytes | "
       << (lt.table.extra_name.empty() ? "extra" : lt.table.extra_name) << " |\n";
    os << "|---|---|---|---|---|---|---|---|\n";
    char buf[256];
    for (const auto& r : lt.table.rows) {
      auto cell = [&](double v) {
        if (std::isnan(v)) return std::string();
        std::snprintf(buf, sizeof(buf), "%.4g", v);
        return std::string(buf);
      };
      std::snprintf(buf, sizeof(buf), "%.3f", r.rate);
      std::string rate = buf;
      std::snprintf(buf, sizeof(buf), "[%.3f, %.3f]", r.ci_lo, r.ci_hi);
      std::string ci = buf;
      os << "| " << r.condition << " | " << r.trials << " | " << r.successes
         << " | " << rate << " | " << ci << " | " << cell(r.mean_steps) << " | "
         << cell(r.memory_bytes) << " | " << cell(r.extra) << " |\n";
    }
  }
}

int cmd_report(const std::string& results, const std::string& plots_dir) {
  std::vector<LoadedTable> tables = scan_results(results);
  if (tables.empty()) {
    std::cerr << "no metrics found under " << results
              << " (expected <sweep>/metrics.csv); run the eval commands first\n";
    return 1;
  }
  fs::create_directories(plots_dir);
  for (const auto& lt : tables) {
    print_table(lt.table);
    if (lt.name == "single")
      eval::write_line_svg(plots_dir + "/single.svg",
                           plot_by_variant(lt.table, lt.table.title, "source steps"));
    else if (lt.name == "obstacle")
      eval::write_line_svg(plots_dir + "/obstacle.svg",
                           plot_simple(lt.table, lt.table.title, "obstacle offset (m)"));
    else if (lt.name == "noise")
      eval::write_line_svg(plots_dir + "/noise.svg", plot_noise(lt.table));
    else if (lt.name == "follow")
      eval::write_line_svg(plots_dir + "/follow.svg", plot_follow(lt.table));
    else if (lt.name == "mapping")
      eval::write_line_svg(plots_dir + "/mapping.svg", plot_mapping(lt.table));
  }
  std::string manifold_csv = results + "/manifold/manifold.csv";
  if (fs::exists(manifold_csv)) {
    eval::ScatterPlot sp;
    sp.title = "behavior embeddings, top two principal components";
    sp.x_label = "pc1";
    sp.y_label = "pc2";
    sp.color_label = "net turn (rad)";
    std::ifstream is(manifold_csv);
    std::string line;
    std::getline(is, line);  // header
    while (std::getline(is, line)) {
      std::istringstream ls(line);
      std::string cell;
      std::vector<double> vals;
      while (std::getline(ls, cell, ',')) vals.push_back(std::stod(cell));
      if (vals.size() < 3) continue;
      sp.x.push_back(vals[0]);
      sp.y.push_back(vals[1]);
      sp.color.push_back(vals[2]);
    }
    if (!sp.x.empty()) eval::write_scatter_svg(plots_dir + "/manifold.svg", sp);
  }
  write_summary_md(plots_dir + "/summary.md", tables);
  std::cout << "wrote plots and summary to " << plots_dir << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"composable-behavior navigation: data, training, maps, experiments"};
  app.require_subcommand(1);

  std::string config_path, out_flag, data_dir, ckpt, clf_path, map_file, results;
  uint64_t map_seed = 0;
  int from_vertex = 0, to_vertex = 0;

  auto add_common = [&](CLI::App* sub) {
    sub->add_option("--config", config_path, "experiment config (json)");
    sub->add_option("--out", out_flag, "output root (default: config out_dir, env BNAV_OUT)");
  };

  CLI::App* c_gen = app.add_subcommand("generate-data", "expert demonstrations over the training worlds");
  add_common(c_gen);

  CLI::App* c_train = app.add_subcommand("train", "behavior-cloning fit on the generated dataset");
  add_common(c_train);
  c_train->add_option("--data", data_dir, "dataset directory (default <out>/data)");

  CLI::App* c_dagger = app.add_subcommand("dagger", "relabeling rounds on top of a cloned checkpoint");
  add_common(c_dagger);
  c_dagger->add_option("--data", data_dir, "dataset directory (default <out>/data)");
  c_dagger->add_option("--ckpt", ckpt, "starting checkpoint (default <out>/model_bc.ckpt)");

  CLI::App* c_clf = app.add_subcommand("train-classifier", "direction classifier for choice-point detection");
  add_common(c_clf);
  c_clf->add_option("--data", data_dir, "dataset directory (default <out>/data)");

  CLI::App* c_single = app.add_subcommand("eval-single", "single-behavior success by source length");
  CLI::App* c_obst = app.add_subcommand("eval-obstacle", "success with an unseen obstacle");
  CLI::App* c_noise = app.add_subcommand("eval-noise", "success under actuation noise");
  CLI::App* c_follow = app.add_subcommand("eval-follow", "long-route following across K");
  CLI::App* c_evalmap = app.add_subcommand("eval-map", "mapping: route success and connectivity");
  for (CLI::App* sub : {c_single, c_obst, c_noise, c_follow, c_evalmap}) {
    add_common(sub);
    sub->add_option("--ckpt", ckpt, "model checkpoint (default <out>/model.ckpt)");
  }
  c_evalmap->add_option("--classifier", clf_path, "direction classifier (default <out>/classifier.dir)");

  CLI::App* c_build = app.add_subcommand("build-map", "build and save the full-demo map of one site world");
  add_common(c_build);
  c_build->add_option("--ckpt", ckpt, "model checkpoint (default <out>/model.ckpt)");
  c_build->add_option("--classifier", clf_path, "direction classifier (default <out>/classifier.dir)");
  c_build->add_option("--seed", map_seed, "site world seed (default: first mapping seed)");

  CLI::App* c_plan = app.add_subcommand("plan", "route between two vertices of a saved map");
  c_plan->add_option("--map", map_file, "map file")->required();
  c_plan->add_option("--from", from_vertex, "start vertex id")->required();
  c_plan->add_option("--to", to_vertex, "goal vertex id")->required();

  CLI::App* c_mani = app.add_subcommand("manifold", "export embeddings projected to 2D");
  add_common(c_mani);
  c_mani->add_option("--ckpt", ckpt, "model checkpoint (default <out>/model.ckpt)");

  CLI::App* c_report = app.add_subcommand("report", "render metrics tables and plots");
  c_report->add_option("--results", results, "results root (default: config out_dir, env BNAV_OUT)");
  c_report->add_option("--config", config_path, "experiment config (json)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    if (e.get_exit_code() == 0) {  // --help and friends
      app.exit(e);
      return 0;
    }
    std::cerr << e.what() << "\n\n" << app.help() << std::flush;
    return 2;
  }

  try {
    eval::ExperimentConfig cfg = load_cfg(config_path);
    std::string out = resolve_out(out_flag, cfg);
    if (data_dir.empty()) data_dir = out + "/data";
    if (clf_path.empty()) clf_path = out + "/classifier.dir";

    if (c_gen->parsed()) {
      write_run_info(out, "generate-data", cfg);
      expert::Dataset ds = expert::generate_dataset(cfg.dataset);
      ds.save(out + "/data");
      std::cout << "dataset: " << ds.records.size() << " records across "
                << ds.worlds.size() << " worlds -> " << out << "/data\n";
      return 0;
    }
    if (c_train->parsed()) {
      write_run_info(out, "train", cfg);
      expert::Dataset ds = expert::Dataset::load(data_dir);
      nn::CbeModel<float> model(nn::ModelDims{}, cfg.train.seed);
      train::Trainer trainer(&model, cfg.train);
      std::vector<train::EpochStats> log = trainer.fit(ds);
      for (const auto& e : log)
        std::cout << "epoch " << e.epoch << "  loss " << e.loss << "  wp "
                  << e.wp_se << "  phi " << e.phi_se << "  lr " << e.lr << "\n";
      nn::save_checkpoint(out + "/model_bc.ckpt", model.params());
      write_epoch_log(out + "/train_log.csv", log);
      std::cout << "wrote " << out << "/model_bc.ckpt\n";
      return 0;
    }
    if (c_dagger->parsed()) {
      write_run_info(out, "dagger", cfg);
      if (ckpt.empty()) ckpt = out + "/model_bc.ckpt";
      expert::Dataset ds = expert::Dataset::load(data_dir);
      nn::CbeModel<float> model = load_model(ckpt);
      train::Trainer trainer(&model, cfg.train);
      std::vector<train::EpochStats> log;
      int epoch = cfg.train.epochs;  // continue the cloned model's schedule
      for (int it = 0; it < cfg.dagger.iterations; ++it) {
        int added = train::collect_relabeled_records(model, &ds, cfg.dagger, it);
        std::cout << "iteration " << it << ": " << added << " relabeled records\n";
        for (int e = 0; e < cfg.dagger.epochs_per_iter; ++e, ++epoch) {
          trainer.opt().set_lr(cfg.train.lr * std::pow(cfg.train.lr_decay, epoch));
          log.push_back(trainer.run_epoch(ds, epoch));
          std::cout << "epoch " << epoch << "  loss " << log.back().loss << "\n";
        }
      }
      nn::save_checkpoint(out + "/model.ckpt", model.params());
      write_epoch_log(out + "/dagger_log.csv", log);
      std::cout << "wrote " << out << "/model.ckpt\n";
      return 0;
    }
    if (c_clf->parsed()) {
      write_run_info(out, "train-classifier", cfg);
      expert::Dataset ds = expert::Dataset::load(data_dir);
      map::ClassifierReport rep;
      map::DirectionClassifier clf =
          map::train_direction_classifier(ds, cfg.classifier, &rep);
      clf.save(out + "/classifier.dir");
      std::cout << "classifier: loss " << rep.train_loss << ", val top-8 "
                << rep.val_top8 << " (" << rep.train_samples << " train / "
                << rep.val_samples << " val)\nwrote " << out << "/classifier.dir\n";
      return 0;
    }

    if (ckpt.empty()) ckpt = out + "/model.ckpt";
    if (c_single->parsed()) {
      nn::CbeModel<float> model = load_model(ckpt);
      save_table(eval::run_single_behavior_sweep(cfg, model, out + "/single/rollouts"),
                 out + "/single", "eval-single", cfg);
      return 0;
    }
    if (c_obst->parsed()) {
      nn::CbeModel<float> model = load_model(ckpt);
      save_table(eval::run_obstacle_sweep(cfg, model, out + "/obstacle/rollouts"),
                 out + "/obstacle", "eval-obstacle", cfg);
      return 0;
    }
    if (c_noise->parsed()) {
      nn::CbeModel<float> model = load_model(ckpt);
      save_table(eval::run_noise_sweep(cfg, model, out + "/noise/rollouts"),
                 out + "/noise", "eval-noise", cfg);
      return 0;
    }
    if (c_follow->parsed()) {
      nn::CbeModel<float> model = load_model(ckpt);
      save_table(eval::run_path_following_sweep(cfg, model, out + "/follow/rollouts"),
                 out + "/follow", "eval-follow", cfg);
      return 0;
    }
    if (c_evalmap->parsed()) {
      nn::CbeModel<float> model = load_model(ckpt);
      map::DirectionClassifier clf = map::DirectionClassifier::load(clf_path);
      save_table(eval::run_mapping_experiment(cfg, model, clf, out + "/mapping"),
                 out + "/mapping", "eval-map", cfg);
      return 0;
    }
    if (c_build->parsed()) {
      nn::CbeModel<float> model = load_model(ckpt);
      map::DirectionClassifier clf = map::DirectionClassifier::load(clf_path);
      if (c_build->count("--seed") == 0) {
        if (cfg.mapping_seeds.empty()) throw DatasetError("no mapping seeds configured");
        map_seed = cfg.mapping_seeds.front();
      }
      write_run_info(out, "build-map", cfg);
      eval::SiteMapBundle bundle = eval::build_site_map(cfg, model, clf, map_seed);
      std::string path = out + "/map_w" + std::to_string(map_seed) + ".map";
      map::save_map(path, bundle.map);
      int nb = 0, np = 0;
      for (const auto& e : bundle.map.edges)
        (e.type == map::EdgeType::Behavioral ? nb : np) += 1;
      std::cout << "map: " << bundle.map.vertices.size() << " vertices, " << nb
                << " behavioral + " << np << " proximal edges from "
                << bundle.demos << " demos (" << bundle.dense_bytes
                << " dense bytes)\nwrote " << path << "\n";
      return 0;
    }
    if (c_plan->parsed()) {
      map::TopoMap m = map::load_map(map_file);
      int nv = static_cast<int>(m.vertices.size());
      if (from_vertex < 0 || from_vertex >= nv || to_vertex < 0 || to_vertex >= nv)
        throw DatasetError("vertex id out of range (map has " +
                           std::to_string(nv) + " vertices)");
      map::RoutePlan route = map::plan_route(m, from_vertex, to_vertex);
      std::cout << "route cost " << route.cost << ", " << route.behaviors.size()
                << " behaviors\nvertices:";
      for (int v : route.vertex_path) std::cout << ' ' << v;
      std::cout << "\nedges:";
      for (int e : route.edge_path)
        std::cout << ' ' << e
                  << (m.edges[static_cast<size_t>(e)].type == map::EdgeType::Proximal
                          ? "(proximal)" : "");
      std::cout << "\n";
      return 0;
    }
    if (c_mani->parsed()) {
      nn::CbeModel<float> model = load_model(ckpt);
      std::string dir = out + "/manifold";
      write_run_info(dir, "manifold", cfg);
      eval::export_manifold(cfg, model, dir + "/manifold.csv");
      std::cout << "wrote " << dir << "/manifold.csv\n";
      return 0;
    }
    if (c_report->parsed()) {
      std::string root = results.empty() ? resolve_out(out_flag, cfg) : results;
      return cmd_report(root, root + "/plots");
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 2;
}
