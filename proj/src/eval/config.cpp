#include "bnav/eval/config.hpp"

#include <filesystem>
#include <fstream>
#include <set>

#include <json.hpp>

#include "bnav/common.hpp"

namespace bnav::eval {
namespace {

using json = nlohmann::ordered_json;

// missing keys keep the caller's default
template <typename T>
void get(const json& j, const char* key, T* out) {
  if (j.contains(key)) *out = j.at(key).get<T>();
}

void read_world(const json& j, sim::WorldSpec* w) {
  get(j, "width_m", &w->width_m);
  get(j, "height_m", &w->height_m);
  get(j, "rooms", &w->rooms);
  get(j, "corridor_width_m", &w->corridor_width_m);
  get(j, "room_min_m", &w->room_min_m);
  get(j, "room_max_m", &w->room_max_m);
  get(j, "extra_links", &w->extra_links);
  get(j, "max_attempts", &w->max_attempts);
}

json dump_world(const sim::WorldSpec& w) {
  return json{{"width_m", w.width_m},
              {"height_m", w.height_m},
              {"rooms", w.rooms},
              {"corridor_width_m", w.corridor_width_m},
              {"room_min_m", w.room_min_m},
              {"room_max_m", w.room_max_m},
              {"extra_links", w.extra_links},
              {"max_attempts", w.max_attempts}};
}

void read_site_world(const json& j, sim::SiteWorldSpec* w) {
  get(j, "width_m", &w->width_m);
  get(j, "height_m", &w->height_m);
  get(j, "junction_grid", &w->junction_grid);
  get(j, "corridor_width_m", &w->corridor_width_m);
  get(j, "site_room_m", &w->site_room_m);
  get(j, "stub_min_m", &w->stub_min_m);
  get(j, "stub_max_m", &w->stub_max_m);
  get(j, "max_attempts", &w->max_attempts);
}

json dump_site_world(const sim::SiteWorldSpec& w) {
  return json{{"width_m", w.width_m},
              {"height_m", w.height_m},
              {"junction_grid", w.junction_grid},
              {"corridor_width_m", w.corridor_width_m},
              {"site_room_m", w.site_room_m},
              {"stub_min_m", w.stub_min_m},
              {"stub_max_m", w.stub_max_m},
              {"max_attempts", w.max_attempts}};
}

void read_limits(const json& j, sim::MotionLimits* l) {
  get(j, "v_max", &l->v_max);
  get(j, "omega_max", &l->omega_max);
}

json dump_limits(const sim::MotionLimits& l) {
  return json{{"v_max", l.v_max}, {"omega_max", l.omega_max}};
}

void read_dataset(const json& j, expert::DatasetConfig* d) {
  get(j, "demos_per_world", &d->demos_per_world);
  get(j, "seed", &d->seed);
  get(j, "demo_noise", &d->demo_noise);
  get(j, "max_kept", &d->max_kept);
  get(j, "min_goal_dist", &d->min_goal_dist);
  get(j, "max_goal_dist", &d->max_goal_dist);
  get(j, "jitter_xy", &d->jitter_xy);
  get(j, "jitter_theta_deg", &d->jitter_theta_deg);
  get(j, "heading_jitter_deg", &d->heading_jitter_deg);
}

json dump_dataset(const expert::DatasetConfig& d) {
  return json{{"demos_per_world", d.demos_per_world},
              {"seed", d.seed},
              {"demo_noise", d.demo_noise},
              {"max_kept", d.max_kept},
              {"min_goal_dist", d.min_goal_dist},
              {"max_goal_dist", d.max_goal_dist},
              {"jitter_xy", d.jitter_xy},
              {"jitter_theta_deg", d.jitter_theta_deg},
              {"heading_jitter_deg", d.heading_jitter_deg}};
}

void read_train(const json& j, train::TrainConfig* t) {
  get(j, "epochs", &t->epochs);
  get(j, "batch", &t->batch);
  get(j, "lr", &t->lr);
  get(j, "lr_decay", &t->lr_decay);
  get(j, "lambda", &t->lambda);
  get(j, "seed", &t->seed);
}

json dump_train(const train::TrainConfig& t) {
  return json{{"epochs", t.epochs}, {"batch", t.batch},       {"lr", t.lr},
              {"lr_decay", t.lr_decay}, {"lambda", t.lambda}, {"seed", t.seed}};
}

void read_dagger(const json& j, train::DaggerConfig* d) {
  get(j, "iterations", &d->iterations);
  get(j, "fraction", &d->fraction);
  get(j, "epochs_per_iter", &d->epochs_per_iter);
  get(j, "budget_factor", &d->budget_factor);
  get(j, "noise_scale", &d->noise_scale);
  get(j, "min_steps", &d->min_steps);
  get(j, "seed", &d->seed);
}

json dump_dagger(const train::DaggerConfig& d) {
  return json{{"iterations", d.iterations},
              {"fraction", d.fraction},
              {"epochs_per_iter", d.epochs_per_iter},
              {"budget_factor", d.budget_factor},
              {"noise_scale", d.noise_scale},
              {"min_steps", d.min_steps},
              {"seed", d.seed}};
}

void read_classifier(const json& j, map::ClassifierConfig* c) {
  get(j, "k", &c->k);
  get(j, "epochs", &c->epochs);
  get(j, "batch", &c->batch);
  get(j, "lr", &c->lr);
  get(j, "lr_decay", &c->lr_decay);
  get(j, "val_fraction", &c->val_fraction);
  get(j, "seed", &c->seed);
}

json dump_classifier(const map::ClassifierConfig& c) {
  return json{{"k", c.k},           {"epochs", c.epochs},
              {"batch", c.batch},   {"lr", c.lr},
              {"lr_decay", c.lr_decay}, {"val_fraction", c.val_fraction},
              {"seed", c.seed}};
}

void read_map(const json& j, map::MapParams* m) {
  get(j, "frames_per_segment", &m->frames_per_segment);
  get(j, "link_tau", &m->link_tau);
  get(j, "link_margin", &m->link_margin);
  get(j, "proximal_cost", &m->proximal_cost);
  get(j, "tau_loc", &m->tau_loc);
  get(j, "min_boundary_gap", &m->min_boundary_gap);
  get(j, "use_choice_points", &m->use_choice_points);
  get(j, "peak_prominence", &m->peaks.prominence);
  get(j, "peak_separation", &m->peaks.min_separation);
}

json dump_map(const map::MapParams& m) {
  return json{{"frames_per_segment", m.frames_per_segment},
              {"link_tau", m.link_tau},
              {"link_margin", m.link_margin},
              {"proximal_cost", m.proximal_cost},
              {"tau_loc", m.tau_loc},
              {"min_boundary_gap", m.min_boundary_gap},
              {"use_choice_points", m.use_choice_points},
              {"peak_prominence", m.peaks.prominence},
              {"peak_separation", m.peaks.min_separation}};
}

void read_exec(const json& j, exec::ExecParams* e) {
  get(j, "phi_switch", &e->phi_switch);
  get(j, "k_theta", &e->k_theta);
  get(j, "slow_radius", &e->slow_radius);
  get(j, "v_floor", &e->v_floor);
  get(j, "budget_factor", &e->budget_factor);
  if (j.contains("limits")) read_limits(j.at("limits"), &e->limits);
}

json dump_exec(const exec::ExecParams& e) {
  return json{{"phi_switch", e.phi_switch},
              {"k_theta", e.k_theta},
              {"slow_radius", e.slow_radius},
              {"v_floor", e.v_floor},
              {"budget_factor", e.budget_factor},
              {"limits", dump_limits(e.limits)}};
}

void validate(const ExperimentConfig& cfg) {
  if (cfg.train_seeds.empty()) throw DatasetError("config needs train seeds");
  if (cfg.heldout_seeds.empty()) throw DatasetError("config needs held-out seeds");
  std::set<uint64_t> train(cfg.train_seeds.begin(), cfg.train_seeds.end());
  for (uint64_t s : cfg.heldout_seeds)
    if (train.count(s))
      throw DatasetError("held-out world seed " + std::to_string(s) +
                         " overlaps the training seeds");
  for (uint64_t s : cfg.mapping_seeds)
    if (train.count(s))
      throw DatasetError("mapping world seed " + std::to_string(s) +
                         " overlaps the training seeds");
  if (cfg.trials < 1 || cfg.follow_trials < 1)
    throw DatasetError("trial counts must be positive");
  if (cfg.success_radius <= 0.0) throw DatasetError("success_radius must be positive");
}

}  // namespace

ExperimentConfig parse_config(const std::string& json_text) {
  json j;
  try {
    j = json::parse(json_text);
  } catch (const json::exception& e) {
    throw IoError(std::string("bad experiment config: ") + e.what());
  }
  ExperimentConfig cfg;
  cfg.eval_world.width_m = 14.0;  // behavior sweeps need multi-room routes
  cfg.eval_world.height_m = 14.0;
  cfg.eval_world.rooms = 7;
  cfg.follow_world.width_m = 22.0;
  cfg.follow_world.height_m = 22.0;
  cfg.follow_world.rooms = 12;
  cfg.follow_world.extra_links = 2;
  cfg.follow_world.max_attempts = 60;
  try {
    get(j, "name", &cfg.name);
    get(j, "out_dir", &cfg.out_dir);
    get(j, "master_seed", &cfg.master_seed);
    get(j, "train_seeds", &cfg.train_seeds);
    get(j, "heldout_seeds", &cfg.heldout_seeds);
    get(j, "mapping_seeds", &cfg.mapping_seeds);
    if (j.contains("train_world")) read_world(j.at("train_world"), &cfg.train_world);
    if (j.contains("eval_world")) read_world(j.at("eval_world"), &cfg.eval_world);
    if (j.contains("follow_world")) read_world(j.at("follow_world"), &cfg.follow_world);
    if (j.contains("site_world")) read_site_world(j.at("site_world"), &cfg.site_world);
    if (j.contains("dataset")) read_dataset(j.at("dataset"), &cfg.dataset);
    if (j.contains("train")) read_train(j.at("train"), &cfg.train);
    if (j.contains("dagger")) read_dagger(j.at("dagger"), &cfg.dagger);
    if (j.contains("classifier")) read_classifier(j.at("classifier"), &cfg.classifier);
    if (j.contains("map")) read_map(j.at("map"), &cfg.map_params);
    if (j.contains("exec")) read_exec(j.at("exec"), &cfg.exec_params);
    get(j, "success_radius", &cfg.success_radius);
    get(j, "length_buckets", &cfg.length_buckets);
    get(j, "obstacle_offsets", &cfg.obstacle_offsets);
    get(j, "noise_scales", &cfg.noise_scales);
    get(j, "follow_segment_frames", &cfg.follow_segment_frames);
    get(j, "demo_fractions", &cfg.demo_fractions);
    get(j, "trials", &cfg.trials);
    get(j, "follow_trials", &cfg.follow_trials);
    get(j, "robustness_steps", &cfg.robustness_steps);
    get(j, "follow_steps", &cfg.follow_steps);
    get(j, "map_locations", &cfg.map_locations);
    get(j, "conn_draws", &cfg.conn_draws);
    get(j, "manifold_samples", &cfg.manifold_samples);
  } catch (const json::exception& e) {
    throw IoError(std::string("bad experiment config: ") + e.what());
  }
  // the dataset always runs over the training worlds
  cfg.dataset.world_seeds = cfg.train_seeds;
  cfg.dataset.world_spec = cfg.train_world;
  cfg.dataset.follow.noise_scale = cfg.dataset.demo_noise;
  cfg.site_world.sites = cfg.map_locations;
  validate(cfg);
  return cfg;
}

ExperimentConfig load_config(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw IoError("cannot open config: " + path);
  std::string text((std::istreambuf_iterator<char>(is)),
                   std::istreambuf_iterator<char>());
  return parse_config(text);
}

std::string config_json(const ExperimentConfig& cfg) {
  json j{{"name", cfg.name},
         {"out_dir", cfg.out_dir},
         {"master_seed", cfg.master_seed},
         {"train_seeds", cfg.train_seeds},
         {"heldout_seeds", cfg.heldout_seeds},
         {"mapping_seeds", cfg.mapping_seeds},
         {"train_world", dump_world(cfg.train_world)},
         {"eval_world", dump_world(cfg.eval_world)},
         {"follow_world", dump_world(cfg.follow_world)},
         {"site_world", dump_site_world(cfg.site_world)},
         {"dataset", dump_dataset(cfg.dataset)},
         {"train", dump_train(cfg.train)},
         {"dagger", dump_dagger(cfg.dagger)},
         {"classifier", dump_classifier(cfg.classifier)},
         {"map", dump_map(cfg.map_params)},
         {"exec", dump_exec(cfg.exec_params)},
         {"success_radius", cfg.success_radius},
         {"length_buckets", cfg.length_buckets},
         {"obstacle_offsets", cfg.obstacle_offsets},
         {"noise_scales", cfg.noise_scales},
         {"follow_segment_frames", cfg.follow_segment_frames},
         {"demo_fractions", cfg.demo_fractions},
         {"trials", cfg.trials},
         {"follow_trials", cfg.follow_trials},
         {"robustness_steps", cfg.robustness_steps},
         {"follow_steps", cfg.follow_steps},
         {"map_locations", cfg.map_locations},
         {"conn_draws", cfg.conn_draws},
         {"manifold_samples", cfg.manifold_samples}};
  return j.dump(2) + "\n";
}

void write_snapshot(const std::string& out_dir, const ExperimentConfig& cfg) {
  std::filesystem::create_directories(out_dir);
  std::string path = out_dir + "/config.snapshot";
  std::ofstream os(path);
  if (!os) throw IoError("cannot write config snapshot: " + path);
  os << config_json(cfg);
  if (!os) throw IoError("config snapshot write failed: " + path);
}

}  // namespace bnav::eval
