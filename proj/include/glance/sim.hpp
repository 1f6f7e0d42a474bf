#pragma once

// Frame-sequence simulator: gaze -> ROIs -> temporal policy -> mosaic ->
// detector -> back-projection, with recoverability by size stratum and the
// pixel/byte cost model. Also the (s, N) sweep over static frames.

#include <algorithm>
#include <array>
#include <atomic>
#include <cstdio>
#include <exception>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <memory>
#include <mutex>
#include <optional>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include <nlohmann/json.hpp>

#include "glance/attention.hpp"
#include "glance/detect.hpp"
#include "glance/errors.hpp"
#include "glance/mosaic.hpp"
#include "glance/roi.hpp"
#include "glance/scene.hpp"
#include "glance/sim_config.hpp"
#include "glance/stabilization.hpp"

namespace glance::sim {

struct StratumCount {
  std::int64_t gt = 0;
  std::int64_t hits = 0;

  std::optional<double> acc() const {
    if (gt == 0) return std::nullopt;
    return static_cast<double>(hits) / static_cast<double>(gt);
  }
};

struct FrameTrace {
  int t = 0;
  bool gaze_away = false;
  std::optional<roi::Fixation> fixation;
  int proposals = 0;          // ROIs kept after NMS
  std::int64_t s_area = 0;    // |S_t|
  std::int64_t u_area = 0;    // |U_t|
  int regions = 0;
  double alpha = 0;
  bool refreshed = false;
  bool ran = false;
  bool failed = false;
  std::string failure;
  int mosaic_w = 0;
  int mosaic_h = 0;
  int placements = 0;
  int detections = 0;
  int predicted = 0;  // boxes carried from the cache on frames without a run
  int orphans = 0;
  std::array<StratumCount, 3> strata{};
  std::size_t world_cells = 0;
};

struct CostReport {
  std::int64_t frames = 0;
  double baseline_pixels = 0;  // frames * W * H
  double pixels_processed = 0; // sum of |M_t|
  double bytes_tx = 0;
  double baseline_bytes = 0;
  std::optional<double> comm_reduction;
  std::optional<double> area_reduction;  // ratio, baseline / processed
  double area_saved = 0;                 // 1 - processed / baseline
};

struct RunReport {
  std::uint64_t seed = 0;
  int frames = 0;
  std::array<StratumCount, 3> strata{};
  StratumCount overall;
  attention::PolicyMetrics policy;
  int refresh_recount = 0;
  int failures = 0;
  int orphans = 0;
  int gaze_away = 0;
  CostReport cost;
  std::vector<FrameTrace> trace;
};

// bytes = sum over runs of |M_t| * bytes_per_pixel + metadata per placement.
inline CostReport cost_model(std::span<const FrameTrace> trace, const roi::CameraIntrinsics& intr, const CostConfig& c) {
  CostReport r;
  r.frames = static_cast<std::int64_t>(trace.size());
  const double frame_px = static_cast<double>(intr.width) * intr.height;
  r.baseline_pixels = frame_px * static_cast<double>(r.frames);
  r.baseline_bytes = r.baseline_pixels * c.bytes_per_pixel;
  for (const auto& f : trace) {
    if (!f.ran) continue;
    const double px = static_cast<double>(f.mosaic_w) * f.mosaic_h;
    r.pixels_processed += px;
    r.bytes_tx += px * c.bytes_per_pixel + c.metadata_bytes_per_roi * f.placements;
  }
  if (r.bytes_tx > 0) r.comm_reduction = r.baseline_bytes / r.bytes_tx;
  if (r.pixels_processed > 0) r.area_reduction = r.baseline_pixels / r.pixels_processed;
  if (r.baseline_pixels > 0) r.area_saved = 1.0 - r.pixels_processed / r.baseline_pixels;
  return r;
}

inline std::vector<stab::PoseSample> make_poses(const SimConfig& c, int frames) {
  const double dt = c.camera.dt();
  switch (c.stabilization.imu) {
    case ImuSource::Synthetic: {
      auto s = c.stabilization.synthetic;
      s.frames = frames;
      s.dt = dt;
      s.seed = c.seed;
      return stab::synthetic_imu(s);
    }
    case ImuSource::Csv: {
      auto p = stab::read_imu_csv(c.stabilization.imu_path);
      if (static_cast<int>(p.size()) < frames)
        throw DataError(c.stabilization.imu_path.string() + ": IMU trace has " + std::to_string(p.size()) +
                        " samples, need " + std::to_string(frames));
      p.resize(static_cast<std::size_t>(frames));
      return p;
    }
    case ImuSource::Static:
    default: {
      std::vector<stab::PoseSample> p(static_cast<std::size_t>(frames));
      for (int i = 0; i < frames; ++i) p[i].t = i * dt;
      return p;
    }
  }
}

inline std::vector<FrameRecord> make_frames(const SimConfig& c) {
  const auto intr = c.camera.intrinsics();
  if (!c.coco.empty()) {
    auto frames = load_coco(c.coco, intr);
    if (static_cast<int>(frames.size()) > c.frames) frames.resize(static_cast<std::size_t>(c.frames));
    return frames;
  }
  return make_scene(c.scene, intr, make_poses(c, c.frames), c.seed);
}

inline std::unique_ptr<det::DetectorPort> make_detector(const DetectorConfig& d, const std::string& subdir = {}) {
  if (d.kind == DetectorKind::External) {
    auto e = d.external;
    if (!subdir.empty()) e.workdir /= subdir;
    return std::make_unique<det::ExternalDetector>(e);
  }
  return std::make_unique<det::OracleDetector>(d.oracle);
}

inline void tally(std::array<StratumCount, 3>& strata, std::span<const det::GtBox> gts,
                  std::span<const det::Detection> dets) {
  for (const auto& g : gts) {
    auto& s = strata[static_cast<int>(det::size_stratum(g.box))];
    ++s.gt;
    s.hits += det::is_hit(g.box, dets) ? 1 : 0;
  }
}

struct DetectOutcome {
  std::vector<det::Detection> frame_dets;
  int canvas_dets = 0;
  int orphans = 0;
};

// Runs the detector on the mosaic of `mask` and maps its output to frame space.
inline DetectOutcome detect_on_mask(det::DetectorPort& detector, const FrameRecord& fr, const roi::RegionMask& mask,
                                    const mosaic::MosaicPlan& plan, const roi::CameraIntrinsics& intr,
                                    std::uint64_t seed) {
  std::optional<mosaic::Mosaic> m;
  if (detector.needs_pixels()) m = mosaic::build_mosaic(render_frame(fr, intr, seed), plan);
  det::DetectRequest req;
  req.frame = fr.t;
  req.canvas = m ? &m->canvas : nullptr;
  req.canvas_width = plan.width;
  req.canvas_height = plan.height;
  req.placements = &plan.placements;
  req.mask = &mask;
  req.ground_truth = fr.gt;
  const auto dets = detector.detect(req);
  DetectOutcome out;
  out.canvas_dets = static_cast<int>(dets.size());
  for (const auto& d : dets) {
    const auto bp = mosaic::backproject(d.box, plan.placements);
    if (bp.orphan) {
      ++out.orphans;
      continue;
    }
    for (const auto& b : bp.boxes) out.frame_dets.push_back({b, d.score, d.cls});
  }
  return out;
}

inline RunReport run_sequence(const std::vector<FrameRecord>& frames, const SimConfig& c, const GazeSource& gaze,
                              det::DetectorPort& detector) {
  if (frames.empty()) throw DataError("empty frame sequence");
  const auto intr = c.camera.intrinsics();
  const IRect frame_rect = intr.frame();
  const double e = roi::uncertainty_radius(intr, c.roi.theta_max_deg);
  const int side = c.roi.side > 0 ? c.roi.side : roi::roi_side(c.roi.hit_probability, e, c.roi.sides).snapped;
  const roi::ProposalConfig prop{c.roi.count, c.roi.sigma_px, c.seed};
  const auto& sc = c.stabilization;

  attention::TemporalState state = attention::make_state(c.policy);
  stab::WorldMap world(sc.world_step_deg);
  stab::BoxCache cache;
  RunReport rep;
  rep.seed = c.seed;
  rep.frames = static_cast<int>(frames.size());
  std::vector<attention::TraceEntry> policy_trace;

  for (std::size_t i = 0; i < frames.size(); ++i) {
    const FrameRecord& fr = frames[i];
    FrameTrace tr;
    tr.t = fr.t;

    // Carry the previous view's regions into this one.
    if (sc.enabled && i > 0) {
      roi::RoiSet moved;
      for (const auto& r : state.regions) {
        const auto rp = stab::reproject_roi(r, frames[i - 1].pose, fr.pose, intr);
        if (rp.visible) moved.push_back(rp.roi);
      }
      state.regions = std::move(moved);
    }

    roi::RoiSet s_t;
    try {
      const auto fix = roi::project_gaze(gaze.gaze(fr), intr);
      tr.fixation = fix;
      s_t = roi::roi_nms(roi::propose_rois(fix, side, e, prop, frame_rect, fr.t), c.roi.nms_iou);
    } catch (const GazeAwayError&) {
      tr.gaze_away = true;
      ++rep.gaze_away;
    }
    tr.proposals = static_cast<int>(s_t.size());
    tr.s_area = roi::spatial_union(s_t, frame_rect).total_area();

    attention::temporal_update(state, s_t);

    if (sc.enabled) {
      const double dt = i > 0 ? fr.pose.t - frames[i - 1].pose.t : c.camera.dt();
      const double alpha = stab::inflation_alpha(fr.pose.a_fwd, dt > 0 ? dt : c.camera.dt(), sc.z_min, sc.alpha_max);
      roi::RoiSet carried, fresh;
      for (const auto& r : state.regions) (r.born_t < state.t ? carried : fresh).push_back(r);
      if (alpha > 0 && !carried.empty()) {
        // Budget applies to the whole union; fresh ROIs are not inflated.
        const double fresh_area = static_cast<double>(roi::spatial_union(fresh, frame_rect).total_area());
        const auto inf = stab::inflate_rois(carried, alpha, frame_rect, c.policy.budget - fresh_area);
        carried = inf.rois;
        tr.alpha = inf.alpha;
      }
      state.regions = std::move(carried);
      state.regions.insert(state.regions.end(), fresh.begin(), fresh.end());
      world.expire(fr.pose.t);
      const double timeout = sc.timeout(i > 0 ? stab::angular_rate(frames[i - 1].pose, fr.pose) : 0.0);
      for (const auto& r : s_t) world.insert(r, fr.pose, intr, fr.pose.t + timeout);
      tr.world_cells = world.size();
    }

    const roi::RegionMask mask = state.mask(frame_rect);
    tr.regions = static_cast<int>(state.regions.size());
    tr.u_area = mask.total_area();
    tr.refreshed = attention::should_refresh(state.t, tr.u_area, c.policy);

    std::vector<det::Detection> dets;
    if (tr.refreshed) {
      if (!mask.empty()) {
        const auto plan = mosaic::plan_mosaic(mask);
        tr.ran = true;
        tr.mosaic_w = plan.width;
        tr.mosaic_h = plan.height;
        tr.placements = static_cast<int>(plan.placements.size());
        try {
          auto out = detect_on_mask(detector, fr, mask, plan, intr, c.seed);
          dets = std::move(out.frame_dets);
          tr.detections = out.canvas_dets;
          tr.orphans = out.orphans;
          rep.orphans += out.orphans;
        } catch (const std::exception& ex) {
          tr.failed = true;
          tr.failure = ex.what();
          ++rep.failures;
        }
      }
      attention::decay_after_run(state);
      cache.clear();
      std::vector<Box> boxes;
      for (const auto& d : dets) boxes.push_back(d.box);
      const double rate = i > 0 ? stab::angular_rate(frames[i - 1].pose, fr.pose) : 0.0;
      cache.insert(boxes, fr.pose, sc.timeout(rate));
    } else {
      for (const auto& b : cache.predict(fr.pose, intr)) dets.push_back({b, 1.0, 0});
      tr.predicted = static_cast<int>(dets.size());
    }

    tally(tr.strata, fr.gt, dets);
    for (int s = 0; s < 3; ++s) {
      rep.strata[s].gt += tr.strata[s].gt;
      rep.strata[s].hits += tr.strata[s].hits;
    }
    policy_trace.push_back({state.t, tr.u_area, tr.refreshed, tr.ran, tr.ran ? static_cast<std::int64_t>(tr.mosaic_w) * tr.mosaic_h : 0});
    rep.trace.push_back(std::move(tr));
  }
  for (const auto& s : rep.strata) {
    rep.overall.gt += s.gt;
    rep.overall.hits += s.hits;
  }
  rep.policy = attention::policy_metrics(policy_trace);
  rep.refresh_recount = attention::recount_refreshes(policy_trace, c.policy);
  rep.cost = cost_model(rep.trace, intr, c.cost);
  return rep;
}

inline RunReport simulate(const SimConfig& c) {
  const auto frames = make_frames(c);
  const GazeSource gaze(c.gaze, c.camera.intrinsics(), c.seed);
  auto detector = make_detector(c.detector);
  return run_sequence(frames, c, gaze, *detector);
}

// ---------------------------------------------------------------------------
// JSON output

inline ordered_json opt_json(const std::optional<double>& v) { return v ? ordered_json(*v) : ordered_json(nullptr); }

inline ordered_json strata_json(const std::array<StratumCount, 3>& s) {
  ordered_json j;
  for (int i = 0; i < 3; ++i)
    j[det::kStratumNames[i]] = {{"gt", s[i].gt}, {"hits", s[i].hits}, {"acc", opt_json(s[i].acc())}};
  return j;
}

inline ordered_json trace_json(const FrameTrace& f) {
  ordered_json j;
  j["t"] = f.t;
  j["gaze_away"] = f.gaze_away;
  if (f.fixation)
    j["fixation"] = {{"u", f.fixation->u}, {"v", f.fixation->v}, {"out_of_frame", f.fixation->out_of_frame}};
  else
    j["fixation"] = nullptr;
  j["proposals"] = f.proposals;
  j["s_area"] = f.s_area;
  j["u_area"] = f.u_area;
  j["regions"] = f.regions;
  j["alpha"] = f.alpha;
  j["refreshed"] = f.refreshed;
  j["ran"] = f.ran;
  j["mosaic"] = {f.mosaic_w, f.mosaic_h};
  j["mosaic_area"] = static_cast<std::int64_t>(f.mosaic_w) * f.mosaic_h;
  j["placements"] = f.placements;
  j["detections"] = f.detections;
  j["predicted"] = f.predicted;
  j["orphans"] = f.orphans;
  j["failed"] = f.failed;
  if (f.failed) j["failure"] = f.failure;
  j["strata"] = strata_json(f.strata);
  j["world_cells"] = f.world_cells;
  return j;
}

inline ordered_json report_json(const RunReport& r, const SimConfig& c) {
  ordered_json j;
  j["seed"] = r.seed;
  j["frames"] = r.frames;
  j["accuracy"] = strata_json(r.strata);
  j["accuracy"]["all"] = {{"gt", r.overall.gt}, {"hits", r.overall.hits}, {"acc", opt_json(r.overall.acc())}};
  j["policy"] = {{"refresh_count", r.policy.refresh_count},
                 {"refresh_recount", r.refresh_recount},
                 {"mean_mosaic_area", r.policy.mean_mosaic_area}};
  j["cost"] = {{"frames", r.cost.frames},
               {"baseline_pixels", r.cost.baseline_pixels},
               {"pixels_processed", r.cost.pixels_processed},
               {"baseline_bytes", r.cost.baseline_bytes},
               {"bytes_tx", r.cost.bytes_tx},
               {"comm_reduction", opt_json(r.cost.comm_reduction)},
               {"area_reduction", opt_json(r.cost.area_reduction)},
               {"area_saved", r.cost.area_saved}};
  j["failures"] = r.failures;
  j["orphans"] = r.orphans;
  j["gaze_away_frames"] = r.gaze_away;
  j["config"] = sim_config_to_json(c);
  return j;
}

inline std::string trace_jsonl(const RunReport& r) {
  std::string out;
  for (const auto& f : r.trace) {
    out += trace_json(f).dump();
    out += '\n';
  }
  return out;
}

// ---------------------------------------------------------------------------
// (s, N) sweep over static frames

struct SweepTable {
  std::vector<int> sides;
  std::vector<int> counts;
  // cells[stratum][side index][count index]
  std::array<std::vector<std::vector<StratumCount>>, 3> cells;
  std::array<StratumCount, 3> global{};
  int failures = 0;
};

// One cell: every frame treated as a still image; its N proposals enter the
// temporal state one per step (lambda = 1, unbounded window), ordered by
// weight and then by seed order, so the N-ROI mask contains every smaller one.
inline std::array<StratumCount, 3> sweep_cell(const std::vector<FrameRecord>& frames,
                                              const std::vector<std::optional<roi::Fixation>>& fixations,
                                              const SimConfig& c, int side, int count, det::DetectorPort& detector,
                                              int& failures) {
  const auto intr = c.camera.intrinsics();
  const IRect frame_rect = intr.frame();
  const double e = roi::uncertainty_radius(intr, c.roi.theta_max_deg);
  const roi::ProposalConfig prop{count, c.roi.sigma_px, c.seed};
  attention::PolicyConfig acc_policy;  // pure accumulation
  std::array<StratumCount, 3> strata{};
  for (std::size_t i = 0; i < frames.size(); ++i) {
    const auto& fr = frames[i];
    attention::TemporalState st = attention::make_state(acc_policy);
    if (fixations[i]) {
      const auto rois = roi::propose_rois(*fixations[i], side, e, prop, frame_rect, fr.t);
      for (const auto& r : rois) attention::temporal_update(st, std::span<const roi::Roi>(&r, 1));
    }
    const auto mask = st.mask(frame_rect);
    std::vector<det::Detection> dets;
    if (!mask.empty()) {
      try {
        dets = detect_on_mask(detector, fr, mask, mosaic::plan_mosaic(mask), intr, c.seed).frame_dets;
      } catch (const std::exception&) {
        ++failures;
      }
    }
    tally(strata, fr.gt, dets);
  }
  return strata;
}

inline SweepTable sweep(const SimConfig& c) {
  const auto frames = make_frames(c);
  const auto intr = c.camera.intrinsics();
  const GazeSource gaze(c.gaze, intr, c.seed);
  std::vector<std::optional<roi::Fixation>> fix(frames.size());
  for (std::size_t i = 0; i < frames.size(); ++i) {
    try {
      fix[i] = roi::project_gaze(gaze.gaze(frames[i]), intr);
    } catch (const GazeAwayError&) {
    }
  }

  SweepTable tab;
  tab.sides = c.sweep.sides;
  tab.counts = c.sweep.counts;
  const std::size_t S = tab.sides.size(), N = tab.counts.size();
  std::vector<std::array<StratumCount, 3>> results(S * N);
  std::vector<int> fails(S * N, 0);

  std::atomic<std::size_t> next{0};
  std::exception_ptr error;
  std::mutex error_mu;
  auto worker = [&] {
    for (std::size_t k; (k = next.fetch_add(1)) < S * N;) {
      try {
        const int side = tab.sides[k / N], count = tab.counts[k % N];
        auto detector =
            make_detector(c.detector, "s" + std::to_string(side) + "_n" + std::to_string(count));
        results[k] = sweep_cell(frames, fix, c, side, count, *detector, fails[k]);
      } catch (...) {
        std::lock_guard lock(error_mu);
        if (!error) error = std::current_exception();
      }
    }
  };
  unsigned threads = c.sweep.threads > 0 ? static_cast<unsigned>(c.sweep.threads)
                                         : std::max(1u, std::thread::hardware_concurrency());
  threads = std::min<unsigned>(threads, static_cast<unsigned>(S * N));
  std::vector<std::thread> pool;
  for (unsigned t = 1; t < threads; ++t) pool.emplace_back(worker);
  worker();
  for (auto& t : pool) t.join();
  if (error) std::rethrow_exception(error);

  for (int s = 0; s < 3; ++s) tab.cells[s].assign(S, std::vector<StratumCount>(N));
  for (std::size_t k = 0; k < S * N; ++k) {
    for (int s = 0; s < 3; ++s) tab.cells[s][k / N][k % N] = results[k][s];
    tab.failures += fails[k];
  }

  // Global baseline: the whole frame goes to the detector.
  auto detector = make_detector(c.detector, "global");
  const std::vector<IRect> full{intr.frame()};
  const auto full_mask = roi::RegionMask::from_rects(full);
  const auto plan = mosaic::plan_mosaic(full_mask);
  for (const auto& fr : frames) {
    std::vector<det::Detection> dets;
    try {
      dets = detect_on_mask(*detector, fr, full_mask, plan, intr, c.seed).frame_dets;
    } catch (const std::exception&) {
      ++tab.failures;
    }
    tally(tab.global, fr.gt, dets);
  }
  return tab;
}

inline std::string fmt_acc(const std::optional<double>& v) {
  if (!v) return "n/a";
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.4f", *v);
  return buf;
}

// Rows: stratum x side; columns: one per ROI count, then the global baseline.
inline std::string sweep_csv(const SweepTable& t) {
  std::ostringstream out;
  out << "stratum,s";
  for (int n : t.counts) out << ",N" << n;
  out << ",global\n";
  for (int s = 0; s < 3; ++s)
    for (std::size_t i = 0; i < t.sides.size(); ++i) {
      out << det::kStratumNames[s] << ',' << t.sides[i];
      for (std::size_t j = 0; j < t.counts.size(); ++j) out << ',' << fmt_acc(t.cells[s][i][j].acc());
      out << ',' << fmt_acc(t.global[s].acc()) << '\n';
    }
  return out.str();
}

inline ordered_json sweep_json(const SweepTable& t, const SimConfig& c) {
  ordered_json j;
  j["seed"] = c.seed;
  j["frames"] = c.frames;
  j["sides"] = t.sides;
  j["counts"] = t.counts;
  ordered_json strata;
  for (int s = 0; s < 3; ++s) {
    ordered_json rows = ordered_json::array();
    for (std::size_t i = 0; i < t.sides.size(); ++i) {
      ordered_json row = ordered_json::array();
      for (std::size_t k = 0; k < t.counts.size(); ++k) row.push_back(opt_json(t.cells[s][i][k].acc()));
      rows.push_back(row);
    }
    strata[det::kStratumNames[s]] = {{"gt", t.global[s].gt}, {"acc", rows}, {"global", opt_json(t.global[s].acc())}};
  }
  j["strata"] = strata;
  j["failures"] = t.failures;
  j["config"] = sim_config_to_json(c);
  return j;
}

}  // namespace glance::sim
