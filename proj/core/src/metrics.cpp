#include "tgrasp/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <map>

namespace tgrasp {

double FilteredTrial::event(const std::string& name) const {
  for (const auto& [n, t] : events)
    if (n == name) return t;
  return -1.0;
}

FilteredTrial preprocess(const TrialLog& log, const AnalysisConfig& cfg) {
  if (!log.meta.feasible) throw ValidationError("preprocess: infeasible trial has no stream");
  FilteredTrial ft;
  ft.meta = log.meta;
  ft.events = log.events;

  const std::size_t n = log.size();
  const std::size_t ds = static_cast<std::size_t>(cfg.downsample);
  std::vector<double> t;
  auto decimate = [&](const std::vector<double>& v) {
    std::vector<double> out;
    out.reserve(n / ds + 1);
    for (std::size_t i = 0; i < n; i += ds) out.push_back(v[i]);
    return out;
  };
  ft.t = decimate(log.t);

  const double fs = 1.0 / (cfg.downsample * 1e-3);
  const FilterBA f = butterworth_lowpass(cfg.filter_order, cfg.filter_cutoff_hz, fs);
  ft.x = filtfilt(f, decimate(log.x));
  ft.y = filtfilt(f, decimate(log.y));
  ft.z = filtfilt(f, decimate(log.z));
  ft.aperture = filtfilt(f, decimate(log.aperture));
  ft.master_aperture = filtfilt(f, decimate(log.master_aperture));

  // central differences, one-sided at the ends
  const std::size_t m = ft.t.size();
  ft.speed.assign(m, 0.0);
  ft.aperture_speed.assign(m, 0.0);
  const double dt = 1.0 / fs;
  for (std::size_t i = 0; i < m; ++i) {
    const std::size_t a = i == 0 ? 0 : i - 1;
    const std::size_t b = i + 1 >= m ? m - 1 : i + 1;
    const double span = static_cast<double>(b - a) * dt;
    if (span <= 0) continue;
    const double dx = ft.x[b] - ft.x[a], dy = ft.y[b] - ft.y[a], dz = ft.z[b] - ft.z[a];
    ft.speed[i] = std::sqrt(dx * dx + dy * dy + dz * dz) / span;
    ft.aperture_speed[i] = (ft.aperture[b] - ft.aperture[a]) / span;
  }
  return ft;
}

namespace {

std::size_t index_at(const FilteredTrial& ft, double time) {
  auto it = std::lower_bound(ft.t.begin(), ft.t.end(), time - 1e-9);
  if (it == ft.t.end()) return ft.t.size() - 1;
  return static_cast<std::size_t>(it - ft.t.begin());
}

}  // namespace

DetectedEvents detect_events(const FilteredTrial& ft, const AnalysisConfig& cfg) {
  DetectedEvents ev;
  const bool perception = ft.meta.experiment == Experiment::perception;
  ev.appearance = perception ? ft.event("shown") : ft.event("go");
  if (ev.appearance < 0) {
    ev.reason = "missing protocol cue";
    return ev;
  }

  if (perception) {
    ev.confirm = ft.event("confirm");
    if (ev.confirm < 0) {
      ev.reason = "missing confirm cue";
      return ev;
    }
    // last sustained aperture hold before the confirm cue, ignoring the
    // initial closed posture
    const std::size_t i0 = index_at(ft, ev.appearance);
    const std::size_t i1 = index_at(ft, ev.confirm);
    double max_ap = 0.0;
    for (std::size_t i = i0; i <= i1 && i < ft.aperture.size(); ++i)
      max_ap = std::max(max_ap, ft.aperture[i]);
    const double dt = 1.0 / ft.fs();
    const std::size_t need = static_cast<std::size_t>(std::ceil(cfg.hold_min_duration / dt));
    std::size_t best_start = 0, best_len = 0, run = 0;
    for (std::size_t i = i0; i <= i1 && i < ft.aperture.size(); ++i) {
      const bool holding = std::abs(ft.aperture_speed[i]) < cfg.hold_speed_thresh &&
                           ft.aperture[i] > 0.2 * max_ap;
      if (holding) {
        ++run;
        if (run >= need) {
          best_start = i + 1 - run;
          best_len = run;
        }
      } else {
        run = 0;
      }
    }
    if (best_len == 0) {
      ev.reason = "no pantomime hold found";
      return ev;
    }
    ev.pantomime_time = ft.t[best_start + best_len / 2];
  }

  // reach segmentation on the endpoint speed, from the GO cue on
  const double go = ft.event("go");
  if (go < 0) {
    ev.reason = "missing go cue";
    return ev;
  }
  const std::size_t w0 = index_at(ft, go);
  const std::size_t n = ft.t.size();
  if (w0 + 2 >= n) {
    ev.reason = "stream ends at go";
    return ev;
  }
  // anchor on the first prominent local maximum after GO: the reach
  // precedes the lift, whose peak can be comparable for slow transports
  double global_max = 0.0;
  for (std::size_t i = w0; i < n; ++i) global_max = std::max(global_max, ft.speed[i]);
  if (global_max < cfg.min_peak_speed) {
    ev.reason = "no speed peak";
    return ev;
  }
  std::size_t i_peak = n;
  for (std::size_t i = std::max(w0, std::size_t(1)); i + 1 < n; ++i) {
    if (ft.speed[i] >= 0.5 * global_max && ft.speed[i] >= ft.speed[i - 1] &&
        ft.speed[i] >= ft.speed[i + 1]) {
      i_peak = i;
      break;
    }
  }
  if (i_peak == n) {
    ev.reason = "no speed peak";
    return ev;
  }
  const double peak = ft.speed[i_peak];

  const double dt = 1.0 / ft.fs();
  const std::size_t hold = static_cast<std::size_t>(std::ceil(cfg.onset_hold / dt));
  const double thresh = cfg.onset_frac * peak;
  const double floor_v = cfg.onset_floor_frac * peak;
  std::size_t i_cross = n;
  for (std::size_t i = w0; i + hold < n; ++i) {
    if (ft.speed[i] >= thresh) {
      bool sustained = true;
      for (std::size_t j = i; j < i + hold; ++j)
        if (ft.speed[j] < thresh) {
          sustained = false;
          break;
        }
      if (sustained) {
        i_cross = i;
        break;
      }
    }
  }
  if (i_cross == n) {
    ev.reason = "no sustained speed crossing";
    return ev;
  }
  std::size_t i_onset = i_cross;
  while (i_onset > w0 && ft.speed[i_onset] > floor_v) --i_onset;
  ev.onset = ft.t[i_onset];

  // first drop below the end threshold after the peak, close to the
  // object, then ride the deceleration down to its local minimum
  std::size_t i_end = n - 1;
  bool found_end = false;
  for (std::size_t i = i_peak; i < n; ++i) {
    if (ft.speed[i] <= cfg.end_frac * peak) {
      const double dx = ft.x[i] - ft.meta.object_pos[0];
      const double dy = ft.y[i] - ft.meta.object_pos[1];
      const double dz = ft.z[i] - ft.meta.object_pos[2];
      if (std::sqrt(dx * dx + dy * dy + dz * dz) <= cfg.capture_radius) {
        i_end = i;
        found_end = true;
        break;
      }
    }
  }
  if (!found_end) {
    ev.reason = "transport never settles at the object";
    return ev;
  }
  ev.transport_end = ft.t[i_end];

  // widest aperture between object appearance and transport end
  const std::size_t a0 = index_at(ft, ev.appearance);
  double mga = -1.0;
  std::size_t i_mga = a0;
  for (std::size_t i = a0; i <= i_end; ++i)
    if (ft.aperture[i] > mga) {
      mga = ft.aperture[i];
      i_mga = i;
    }
  ev.mga_time = ft.t[i_mga];

  // lift: vertical displacement past threshold after transport end
  const double z_base = ft.z[i_end];
  double z_max = z_base;
  std::size_t i_zmax = i_end;
  for (std::size_t i = i_end; i < n; ++i)
    if (ft.z[i] > z_max) {
      z_max = ft.z[i];
      i_zmax = i;
    }
  if (z_max - z_base > cfg.lift_thresh) {
    std::size_t i_lift = i_end;
    while (i_lift < i_zmax && ft.z[i_lift] < z_max - 0.001) ++i_lift;
    ev.lift_end = ft.t[i_lift];
  }

  ev.analyzable = true;
  return ev;
}

double metric_value(const TrialMetrics& m, int metric_index) {
  switch (metric_index) {
    case 0: return m.mga;
    case 1: return m.mga_time_fraction;
    case 2: return m.ps;
    case 3: return m.reaction_time;
    case 4: return m.transport_time;
    case 5: return m.total_time;
    case 6: return m.perception_time;
    case 7: return m.path_length;
    case 8: return m.peak_endpoint_speed;
    default: return m.peak_aperture_speed;
  }
}

TrialMetrics compute_metrics(const FilteredTrial& ft, const DetectedEvents& ev,
                             const AnalysisConfig&) {
  TrialMetrics m;
  m.subject_id = ft.meta.subject_id;
  m.condition = ft.meta.condition;
  m.experiment = ft.meta.experiment;
  m.trial_index = ft.meta.trial_index;
  m.object_mm = ft.meta.object_mm;
  m.is_training = ft.meta.is_training;
  m.truth_intended_mga = ft.meta.intended_mga;
  m.truth_intended_ps =
      ft.meta.experiment == Experiment::perception ? ft.meta.intended_ps : kMissing;
  m.truth_onset = ft.event("onset");
  m.truth_mga_time = ft.event("mga");
  m.truth_ceiling = ft.meta.ceiling;
  m.analyzable = ev.analyzable;
  m.exclude_reason = ev.reason;
  if (!ev.analyzable) return m;

  const bool perception = ft.meta.experiment == Experiment::perception;
  if (perception) {
    if (ev.pantomime_time >= 0) {
      m.ps = ft.aperture[index_at(ft, ev.pantomime_time)];
      m.perception_time = ev.confirm - ev.appearance;
    }
    return m;  // the reach of a perception trial is not analyzed
  }

  const std::size_t i0 = index_at(ft, ev.appearance);
  const std::size_t i_on = index_at(ft, ev.onset);
  const std::size_t i_end = index_at(ft, ev.transport_end);

  m.reaction_time = ev.onset - ev.appearance;
  m.transport_time = ev.transport_end - ev.onset;
  if (ev.lift_end >= 0) m.total_time = ev.lift_end - ev.appearance;

  double mga = -1.0;
  for (std::size_t i = i0; i <= i_end; ++i) mga = std::max(mga, ft.aperture[i]);
  m.mga = mga;
  if (m.transport_time > 0) {
    double frac = (ev.mga_time - ev.onset) / m.transport_time;
    m.mga_time_fraction = std::clamp(frac, 0.0, 1.0);
  }

  double path = 0.0;
  for (std::size_t i = i0 + 1; i <= i_end; ++i) {
    const double dx = ft.x[i] - ft.x[i - 1];
    const double dy = ft.y[i] - ft.y[i - 1];
    const double dz = ft.z[i] - ft.z[i - 1];
    path += std::sqrt(dx * dx + dy * dy + dz * dz);
  }
  m.path_length = m_to_mm(path);

  double vpk = 0.0, apk = 0.0;
  for (std::size_t i = i_on; i <= i_end; ++i) {
    vpk = std::max(vpk, ft.speed[i]);
    apk = std::max(apk, std::abs(ft.aperture_speed[i]));
  }
  m.peak_endpoint_speed = m_to_mm(vpk);
  m.peak_aperture_speed = apk;
  return m;
}

TrialMetrics analyze_trial(const TrialLog& log, const AnalysisConfig& cfg) {
  if (!log.meta.feasible) {
    TrialMetrics m;
    m.subject_id = log.meta.subject_id;
    m.condition = log.meta.condition;
    m.experiment = log.meta.experiment;
    m.trial_index = log.meta.trial_index;
    m.object_mm = log.meta.object_mm;
    m.is_training = log.meta.is_training;
    m.analyzable = false;
    m.exclude_reason = "infeasible trial";
    return m;
  }
  const FilteredTrial ft = preprocess(log, cfg);
  return compute_metrics(ft, detect_events(ft, cfg), cfg);
}

std::vector<SubjectStats> aggregate(const std::vector<TrialMetrics>& trials) {
  std::map<std::tuple<std::string, int, double>, SubjectStats> groups;
  for (const auto& tm : trials) {
    if (tm.is_training) continue;
    auto key = std::make_tuple(tm.subject_id, static_cast<int>(tm.experiment), tm.object_mm);
    auto& g = groups[key];
    if (g.subject_id.empty()) {
      g.subject_id = tm.subject_id;
      g.condition = tm.condition;
      g.experiment = tm.experiment;
      g.object_mm = tm.object_mm;
      g.mean.fill(kMissing);
      g.sd.fill(kMissing);
    }
  }
  // two passes: accumulate means, then SDs (n-1 denominator)
  std::map<std::tuple<std::string, int, double>, std::array<std::vector<double>, 10>> values;
  for (const auto& tm : trials) {
    if (tm.is_training || !tm.analyzable) continue;
    auto key = std::make_tuple(tm.subject_id, static_cast<int>(tm.experiment), tm.object_mm);
    auto& vs = values[key];
    for (int k = 0; k < 10; ++k) {
      const double v = metric_value(tm, k);
      if (!is_missing(v)) vs[static_cast<std::size_t>(k)].push_back(v);
    }
  }
  std::vector<SubjectStats> out;
  out.reserve(groups.size());
  for (auto& [key, g] : groups) {
    const auto it = values.find(key);
    for (int k = 0; k < 10; ++k) {
      const auto& vs = it == values.end() ? std::vector<double>{}
                                          : it->second[static_cast<std::size_t>(k)];
      const int n = static_cast<int>(vs.size());
      g.n[static_cast<std::size_t>(k)] = n;
      g.low_confidence[static_cast<std::size_t>(k)] = n < 3;
      if (n == 0) continue;
      double s = 0;
      for (double v : vs) s += v;
      const double mean = s / n;
      g.mean[static_cast<std::size_t>(k)] = mean;
      if (n >= 2) {
        double ss = 0;
        for (double v : vs) ss += (v - mean) * (v - mean);
        g.sd[static_cast<std::size_t>(k)] = std::sqrt(ss / (n - 1));
      }
    }
    out.push_back(std::move(g));
  }
  return out;
}

}  // namespace tgrasp
