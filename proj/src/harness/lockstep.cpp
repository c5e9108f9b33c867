#include "rodflow/harness/lockstep.hpp"

#include "rodflow/centralflow.hpp"
#include "rodflow/error.hpp"
#include "rodflow/harness/csv.hpp"
#include "rodflow/harness/report.hpp"

#include <cmath>
#include <limits>
#include <memory>

namespace rodflow::harness {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

SpectralOptions spectral_for(const ExperimentConfig& c, std::uint64_t stream) {
  SpectralOptions o;
  o.tol = c.spectral_tol;
  o.max_iter = c.spectral_max_iter;
  o.seed = split_seed(c.seed, static_cast<std::uint64_t>(SeedStream::SpectralBase) + stream);
  return o;
}

// Sharpness with a warm start; on non-convergence the best estimate is kept.
double sharpness_at(const LossSpec& spec, const Weights& w, const SpectralOptions& o, Vec& warm) {
  try {
    const SharpnessResult r = sharpness_pair(spec, w, o, warm.size() ? &warm : nullptr);
    warm = r.vector;
    return r.value;
  } catch (const NonConvergenceError& e) {
    return e.estimate();
  }
}

bool gd_pair_ok(const Weights& w) { return all_finite(w) && w.norm() <= kDivergenceBound; }

struct Lane {
  FlowId id;
  std::unique_ptr<FlowStepper> rod;
  std::unique_ptr<CentralFlowStepper> cf;
  std::unique_ptr<CsvWriter> trajectory;
  SpectralOptions spectral;
  Vec warm_center, warm_plus, warm_minus;
  double sharp_center = kNaN;
  double sharp_edge = kNaN;
  bool alive = true;
  Termination termination = Termination::Completed;
  std::string detail;
  // running sums
  std::size_t rows = 0;
  double sum_disc = 0.0, max_disc = 0.0, sum_align = 0.0;
  std::size_t band = 0, sharp_rows = 0;
  double last_ratio = kNaN;
};

struct Snapshot {
  Weights wbar;
  Vec delta;
  double omega_trace = kNaN;
  double margin_min = kNaN;
  double ratio = kNaN;
};

std::vector<std::string> metric_names(FlowId id) {
  std::vector<std::string> n = {"loss_center",  "loss_edge_plus",     "loss_edge_minus",
                                "sharpness_center", "sharpness_edge", "delta_norm",
                                "center_discrepancy", "delta_alignment"};
  if (id == FlowId::Rf || id == FlowId::FoRf) n.push_back("sigma_eigen_ratio");
  return n;
}

}  // namespace

WarmupResult run_warmup(const ExperimentConfig& config) {
  config.validate();
  WarmupResult r;
  Weights prev = config.init;
  Weights cur = config.init;
  const double threshold = 2.0 / config.eta;
  const SpectralOptions so = spectral_for(config, 0);
  Vec warm;
  int streak = 0;
  for (int t = 1; t <= config.warmup_steps; ++t) {
    Weights next;
    try {
      next = gd_step(config.loss, cur, config.eta);
    } catch (const Error& e) {
      if (e.code() != ErrorCode::NonFinite) throw;
      next = Weights::Constant(cur.size(), std::numeric_limits<double>::infinity());
    }
    if (!gd_pair_ok(next)) {
      r.diverged = true;
      r.detail = "gradient descent diverged during warm-up at step " + std::to_string(t);
      break;
    }
    prev = cur;
    cur = next;
    r.steps_run = t;
    if (config.warmup_auto_stop && t >= 2 && t % config.eig_cadence == 0) {
      const double s = sharpness_at(config.loss, cur, so, warm);
      streak = std::abs(s - threshold) <= 0.05 * threshold ? streak + 1 : 0;
      if (streak >= 100) {
        r.auto_stopped = true;
        break;
      }
    }
  }
  r.w_prev = prev;
  r.w_last = cur;
  r.seed = to_rod(prev, cur);
  return r;
}

RunSummary run_lockstep(const ExperimentConfig& config, const WarmupResult& warmup) {
  config.validate();
  require(!warmup.diverged, ErrorCode::InvalidArgument, "run_lockstep: warm-up diverged");
  const std::filesystem::path dir = config.output_dir;
  std::filesystem::create_directories(dir);
  const LossSpec& spec = config.loss;
  const FlowConfig fc = config.flow_config();
  const double threshold = 2.0 / config.eta;

  // GD reference always runs; its columns appear only when requested.
  Weights gd_prev = warmup.w_prev, gd_cur = warmup.w_last;
  bool gd_alive = true;

  std::vector<Lane> lanes;
  for (FlowId id : config.flows) {
    Lane lane;
    lane.id = id;
    lane.spectral = spectral_for(config, static_cast<std::uint64_t>(id) + 1);
    const RodState seed = make_rod_state(warmup.seed.wbar, warmup.seed.delta, fc);
    switch (id) {
      case FlowId::Gd: break;
      case FlowId::Gf: lane.rod = std::make_unique<FlowStepper>(spec, FlowKind::Gradient, fc, seed); break;
      case FlowId::Rf: lane.rod = std::make_unique<FlowStepper>(spec, FlowKind::Rod, fc, seed); break;
      case FlowId::FoRf: lane.rod = std::make_unique<FlowStepper>(spec, FlowKind::FirstOrderRod, fc, seed); break;
      case FlowId::Cf: {
        CentralFlowOptions co;
        co.k = config.k;
        co.eig_cadence = config.eig_cadence;
        co.spectral = lane.spectral;
        lane.cf = std::make_unique<CentralFlowStepper>(spec, fc, co, warmup.seed.wbar);
        break;
      }
    }
    std::vector<std::string> header = {"time", "loss_center", "loss_edge_plus", "loss_edge_minus", "sharpness_center",
                                       "delta_norm"};
    if (id == FlowId::Cf) {
      header.push_back("omega_trace");
      header.push_back("margin_min");
    }
    lane.trajectory =
        std::make_unique<CsvWriter>(dir / ("trajectory_" + std::string(flow_id_name(id)) + ".csv"), header);
    lanes.push_back(std::move(lane));
  }

  std::vector<std::string> mheader = {"time", "sharpness_stale"};
  for (const Lane& l : lanes)
    for (const std::string& m : metric_names(l.id)) mheader.push_back(std::string(flow_id_name(l.id)) + "_" + m);
  CsvWriter metrics(dir / "metrics.csv", mheader);

  auto snapshot = [&](Lane& l) {
    Snapshot s;
    switch (l.id) {
      case FlowId::Gd: {
        const RodCoordinates rc = to_rod(gd_prev, gd_cur);
        s.wbar = rc.wbar;
        s.delta = rc.delta;
        break;
      }
      case FlowId::Cf: {
        s.wbar = l.cf->wbar();
        s.delta = l.cf->delta();
        s.omega_trace = l.cf->covariance_now().omega.trace();
        s.margin_min = l.cf->margin_min_now();
        break;
      }
      default:
        s.wbar = l.rod->state().wbar;
        s.delta = l.rod->delta();
        if (l.id != FlowId::Gf) s.ratio = sigma_eigen_ratio(l.rod->state().sigma);
        break;
    }
    return s;
  };

  RunSummary summary;
  summary.warmup = warmup;
  for (int step = 0; step <= config.compare_steps; ++step) {
    if (step > 0) {
      if (gd_alive) {
        Weights next;
        try {
          next = gd_step(spec, gd_cur, config.eta);
        } catch (const Error& e) {
          if (e.code() != ErrorCode::NonFinite) throw;
          next = Weights::Constant(gd_cur.size(), kNaN);
        }
        if (gd_pair_ok(next)) {
          gd_prev = gd_cur;
          gd_cur = next;
        } else {
          gd_alive = false;
        }
      }
      for (Lane& l : lanes) {
        if (!l.alive) continue;
        if (l.id == FlowId::Gd) {
          if (!gd_alive) {
            l.alive = false;
            l.termination = Termination::Diverged;
            l.detail = "gradient descent diverged at step " + std::to_string(step);
          }
          continue;
        }
        const bool ok = l.rod ? l.rod->advance_unit() : l.cf->advance_unit();
        if (!ok) {
          l.alive = false;
          l.termination = l.rod ? l.rod->termination() : l.cf->termination();
          l.detail = l.rod ? l.rod->detail() : l.cf->detail();
        }
      }
    }

    const bool fresh = step % config.eig_cadence == 0;
    const RodCoordinates gd = to_rod(gd_prev, gd_cur);
    std::vector<double> mrow = {static_cast<double>(step), fresh ? 0.0 : 1.0};
    for (Lane& l : lanes) {
      const std::size_t width = metric_names(l.id).size();
      if (!l.alive) {
        mrow.insert(mrow.end(), width, kNaN);
        continue;
      }
      Snapshot s;
      try {
        s = snapshot(l);
      } catch (const NonConvergenceError& e) {
        l.alive = false;
        l.termination = Termination::SolverFailure;
        l.detail = e.what();
        mrow.insert(mrow.end(), width, kNaN);
        continue;
      }
      const double lc = loss_value(spec, s.wbar);
      const double lp = loss_value(spec, s.wbar + s.delta);
      const double lm = loss_value(spec, s.wbar - s.delta);
      if (fresh) {
        l.sharp_center = sharpness_at(spec, s.wbar, l.spectral, l.warm_center);
        if (s.delta.norm() == 0.0) {
          l.sharp_edge = l.sharp_center;
        } else {
          const double sp = sharpness_at(spec, s.wbar + s.delta, l.spectral, l.warm_plus);
          const double sm = sharpness_at(spec, s.wbar - s.delta, l.spectral, l.warm_minus);
          l.sharp_edge = 0.5 * (sp + sm);
        }
      }
      const double disc = gd_alive ? (gd.wbar - s.wbar).norm() : kNaN;
      const double nd = s.delta.norm(), ng = gd.delta.norm();
      const double align = (nd > 0.0 && ng > 0.0) ? std::min(1.0, std::abs(gd.delta.dot(s.delta)) / (nd * ng)) : 0.0;

      std::vector<double> trow = {static_cast<double>(step), lc, lp, lm, l.sharp_center, nd};
      if (l.id == FlowId::Cf) {
        trow.push_back(s.omega_trace);
        trow.push_back(s.margin_min);
      }
      l.trajectory->write_row(trow);
      mrow.insert(mrow.end(), {lc, lp, lm, l.sharp_center, l.sharp_edge, nd, disc, align});
      if (l.id == FlowId::Rf || l.id == FlowId::FoRf) mrow.push_back(s.ratio);

      ++l.rows;
      l.sum_disc += disc;
      l.max_disc = std::max(l.max_disc, disc);
      l.sum_align += align;
      if (std::isfinite(l.sharp_center)) {
        ++l.sharp_rows;
        if (l.sharp_center >= 0.9 * threshold && l.sharp_center <= 1.1 * threshold) ++l.band;
      }
      l.last_ratio = s.ratio;
    }
    metrics.write_row(mrow);
    ++summary.rows;
  }

  for (const Lane& l : lanes) {
    FlowSummary f;
    f.id = l.id;
    f.rows = l.rows;
    const double n = static_cast<double>(std::max<std::size_t>(l.rows, 1));
    f.mean_center_discrepancy = l.sum_disc / n;
    f.max_center_discrepancy = l.max_disc;
    f.mean_delta_alignment = l.sum_align / n;
    f.sharpness_band_fraction = l.sharp_rows ? static_cast<double>(l.band) / static_cast<double>(l.sharp_rows) : kNaN;
    f.terminal_sharpness = l.sharp_center;
    f.terminal_sigma_eigen_ratio = l.last_ratio;
    f.termination = l.termination;
    f.detail = l.detail;
    if (l.termination != Termination::Completed) summary.numerical_abort = true;
    summary.flows.push_back(f);
  }
  return summary;
}

int run_experiment(const ExperimentConfig& config, RunSummary* summary_out) {
  config.validate();
  const WarmupResult warmup = run_warmup(config);
  RunSummary summary;
  if (warmup.diverged) {
    summary.warmup = warmup;
    summary.numerical_abort = true;
  } else {
    summary = run_lockstep(config, warmup);
  }
  emit_report(config.output_dir, config, summary);
  if (summary_out) *summary_out = summary;
  return summary.numerical_abort ? 3 : 0;
}

}  // namespace rodflow::harness
