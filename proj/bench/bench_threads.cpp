// Times the serial reference path against the OpenMP path on the two
// workloads that dominate wall clock: batched training gradients and
// closed-loop rollouts. Prints per-path timings, the speedup, and a
// checksum so the bit-identity claim can be eyeballed here too.
#include <chrono>
#include <cstdio>
#include <cstring>
#include <vector>

#include "bnav/expert/dataset.hpp"
#include "bnav/nn/model.hpp"
#include "bnav/sim/world.hpp"
#include "bnav/threading.hpp"
#include "bnav/train/trainer.hpp"

using namespace bnav;
using Clock = std::chrono::steady_clock;

namespace {

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

expert::Dataset make_dataset(int demos) {
  expert::DatasetConfig dc;
  dc.world_seeds = {11, 12};
  dc.world_spec.width_m = 12.0;
  dc.world_spec.height_m = 12.0;
  dc.world_spec.rooms = 6;
  dc.demos_per_world = demos;
  return expert::generate_dataset(dc);
}

// one training epoch; returns (seconds, loss) with loss as the checksum
std::pair<double, double> time_epoch(const expert::Dataset& ds, bool parallel) {
  threading::set_parallel(parallel);
  nn::CbeModel<float> model(nn::ModelDims{}, 3);
  train::TrainConfig tc;
  tc.epochs = 1;
  train::Trainer trainer(&model, tc);
  Clock::time_point t0 = Clock::now();
  train::EpochStats st = trainer.run_epoch(ds, 0);
  return {seconds_since(t0), st.loss};
}

std::pair<double, double> time_generation(int demos, bool parallel) {
  threading::set_parallel(parallel);
  Clock::time_point t0 = Clock::now();
  expert::Dataset ds = make_dataset(demos);
  double checksum = 0.0;
  for (const auto& r : ds.records) checksum += r.total_len;
  return {seconds_since(t0), checksum};
}

void report(const char* name, std::pair<double, double> serial,
            std::pair<double, double> parallel) {
  std::printf("%-18s serial %7.2fs   parallel %7.2fs   speedup %.2fx   %s\n",
              name, serial.first, parallel.first, serial.first / parallel.first,
              serial.second == parallel.second ? "checksums match"
                                               : "CHECKSUM MISMATCH");
}

}  // namespace

int main(int argc, char** argv) {
  int demos = 40;
  if (argc > 1) demos = std::atoi(argv[1]);
  std::printf("workers=%d  demos per world=%d\n", threading::worker_count(),
              demos);

  report("demo generation", time_generation(demos, false),
         time_generation(demos, true));

  expert::Dataset ds = make_dataset(demos);
  report("training epoch", time_epoch(ds, false), time_epoch(ds, true));

  threading::set_parallel(true);
  return 0;
}
