#pragma once

#include <nlohmann/json.hpp>

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "lithoseg/imgcore/io.hpp"
#include "lithoseg/metrics/electrical.hpp"
#include "lithoseg/metrics/roughness.hpp"
#include "lithoseg/metrics/seg.hpp"

namespace lithoseg::metrics {

struct EvalOptions {
  int min_overlap = 5;
  EsdOptions esd{};
  CdOptions cd{};
  RoughOptions rough{};
};

struct ElecReport {
  int opens = 0;
  int shorts = 0;
  int oscc = 0;
  int esd = 0;
  std::optional<double> cd_pred, cd_gt;
  std::optional<double> cd_err() const {
    if (!cd_pred || !cd_gt) return std::nullopt;
    return *cd_pred - *cd_gt;
  }
};

// Signed differences pred - gt of every roughness parameter.
struct RoughError {
  double re = 0, rea = 0, req2 = 0, rw = 0, rwa = 0, rwq2 = 0;
};

inline RoughError rough_error(const RoughReport& p, const RoughReport& g) {
  return {p.r_e - g.r_e, p.r_ea - g.r_ea, p.r_eq2 - g.r_eq2, p.r_w - g.r_w, p.r_wa - g.r_wa, p.r_wq2 - g.r_wq2};
}

struct PairReport {
  std::string id;
  SegReport seg;
  ElecReport elec;
  std::optional<RoughReport> rough_pred, rough_gt;
  std::optional<RoughError> rough_err() const {
    if (!rough_pred || !rough_gt) return std::nullopt;
    return rough_error(*rough_pred, *rough_gt);
  }
};

inline PairReport evaluate_pair(const BinaryMask& pred, const BinaryMask& gt, const std::string& id = "",
                                const EvalOptions& opt = {}) {
  PairReport r;
  r.id = id;
  r.seg = seg_metrics(pred, gt);
  const auto o = oscc(pred, gt, opt.min_overlap);
  r.elec.opens = o.opens;
  r.elec.shorts = o.shorts;
  r.elec.oscc = o.total();
  r.elec.esd = esd(pred, gt, opt.esd);
  auto try_cd = [&](const BinaryMask& m) -> std::optional<double> {
    try {
      return cd(m, opt.cd);
    } catch (const DomainError&) {
      return std::nullopt;
    }
  };
  r.elec.cd_pred = try_cd(pred);
  r.elec.cd_gt = try_cd(gt);
  auto try_rough = [&](const BinaryMask& m) -> std::optional<RoughReport> {
    try {
      return roughness(m, opt.rough, id);
    } catch (const RoughnessError&) {
      return std::nullopt;
    }
  };
  r.rough_pred = try_rough(pred);
  r.rough_gt = try_rough(gt);
  return r;
}

// Running mean of a signed quantity and of its magnitude.
struct Mean {
  double sum = 0.0, abs_sum = 0.0;
  long n = 0;
  void add(double v) {
    sum += v;
    abs_sum += std::abs(v);
    ++n;
  }
  std::optional<double> mean() const { return n ? std::optional(sum / n) : std::nullopt; }
  std::optional<double> abs_mean() const { return n ? std::optional(abs_sum / n) : std::nullopt; }
};

struct EvalSummary {
  std::vector<PairReport> per_image;
  std::vector<std::string> missing;
  Mean iou, pa, f1, oscc, esd, cd_err, re, rea, req2, rw, rwa, rwq2;
  Mean cd_pred, cd_gt;

  void add(PairReport r) {
    iou.add(r.seg.iou);
    pa.add(r.seg.pa);
    f1.add(r.seg.f1);
    oscc.add(r.elec.oscc);
    esd.add(r.elec.esd);
    if (auto e = r.elec.cd_err()) cd_err.add(*e);
    if (r.elec.cd_pred) cd_pred.add(*r.elec.cd_pred);
    if (r.elec.cd_gt) cd_gt.add(*r.elec.cd_gt);
    if (auto e = r.rough_err()) {
      re.add(e->re);
      rea.add(e->rea);
      req2.add(e->req2);
      rw.add(e->rw);
      rwa.add(e->rwa);
      rwq2.add(e->rwq2);
    }
    per_image.push_back(std::move(r));
  }
};

struct MaskPair {
  std::string id;
  const BinaryMask* pred;
  const BinaryMask* gt;
};

// Pairs are aggregated in the given order.
inline EvalSummary evaluate_masks(const std::vector<MaskPair>& pairs, const EvalOptions& opt = {}) {
  EvalSummary s;
  for (const auto& p : pairs) s.add(evaluate_pair(*p.pred, *p.gt, p.id, opt));
  return s;
}

struct FilePair {
  std::string id;
  std::filesystem::path pred;
  std::filesystem::path gt;
};

// Missing files are listed in the summary; the remaining pairs are still
// evaluated.
inline EvalSummary evaluate_corpus(std::vector<FilePair> pairs, const EvalOptions& opt = {}) {
  std::sort(pairs.begin(), pairs.end(), [](const FilePair& a, const FilePair& b) { return a.id < b.id; });
  EvalSummary s;
  for (const auto& p : pairs) {
    bool ok = true;
    for (const auto& f : {p.pred, p.gt})
      if (!std::filesystem::exists(f)) {
        s.missing.push_back(f.string());
        ok = false;
      }
    if (!ok) continue;
    s.add(evaluate_pair(img::load_mask(p.pred), img::load_mask(p.gt), p.id, opt));
  }
  return s;
}

namespace detail {

inline nlohmann::json opt_json(const std::optional<double>& v) { return v ? nlohmann::json(*v) : nlohmann::json(nullptr); }

inline nlohmann::json mean_json(const Mean& m) {
  return {{"mean", opt_json(m.mean())}, {"abs_mean", opt_json(m.abs_mean())}, {"n", m.n}};
}

inline nlohmann::json rough_json(const RoughReport& r) {
  return {{"re", r.r_e}, {"rea", r.r_ea}, {"req2", r.r_eq2}, {"rw", r.r_w}, {"rwa", r.r_wa}, {"rwq2", r.r_wq2}};
}

}  // namespace detail

inline nlohmann::json to_json(const PairReport& r) {
  nlohmann::json j;
  j["id"] = r.id;
  j["seg"] = {{"iou", r.seg.iou}, {"pa", r.seg.pa}, {"f1", r.seg.f1}};
  j["elec"] = {{"oscc", r.elec.oscc},
               {"opens", r.elec.opens},
               {"shorts", r.elec.shorts},
               {"esd", r.elec.esd},
               {"cd_pred", detail::opt_json(r.elec.cd_pred)},
               {"cd_gt", detail::opt_json(r.elec.cd_gt)},
               {"cd_err", detail::opt_json(r.elec.cd_err())}};
  if (auto e = r.rough_err())
    j["rough"] = {{"re", e->re}, {"rea", e->rea}, {"req2", e->req2}, {"rw", e->rw}, {"rwa", e->rwa}, {"rwq2", e->rwq2}};
  else
    j["rough"] = nullptr;
  j["rough_pred"] = r.rough_pred ? detail::rough_json(*r.rough_pred) : nlohmann::json(nullptr);
  j["rough_gt"] = r.rough_gt ? detail::rough_json(*r.rough_gt) : nlohmann::json(nullptr);
  return j;
}

inline nlohmann::json to_json(const EvalSummary& s) {
  nlohmann::json per = nlohmann::json::array();
  for (const auto& r : s.per_image) per.push_back(to_json(r));
  nlohmann::json corpus{{"images", s.per_image.size()},
                        {"iou", detail::mean_json(s.iou)},
                        {"pa", detail::mean_json(s.pa)},
                        {"f1", detail::mean_json(s.f1)},
                        {"oscc", detail::mean_json(s.oscc)},
                        {"esd", detail::mean_json(s.esd)},
                        {"cd_err", detail::mean_json(s.cd_err)},
                        {"cd_pred", detail::mean_json(s.cd_pred)},
                        {"cd_gt", detail::mean_json(s.cd_gt)},
                        {"re", detail::mean_json(s.re)},
                        {"rea", detail::mean_json(s.rea)},
                        {"req2", detail::mean_json(s.req2)},
                        {"rw", detail::mean_json(s.rw)},
                        {"rwa", detail::mean_json(s.rwa)},
                        {"rwq2", detail::mean_json(s.rwq2)}};
  return {{"per_image", per}, {"corpus", corpus}, {"missing", s.missing}};
}

// Fixed-width comparison table: segmentation scores x100, then signed
// corpus-mean errors with mean absolute errors in a second block.
inline std::string format_table(const std::vector<std::pair<std::string, const EvalSummary*>>& rows) {
  auto cell = [](const std::optional<double>& v, double scale = 1.0) {
    char buf[32];
    if (v)
      std::snprintf(buf, sizeof buf, "%9.2f", *v * scale);
    else
      std::snprintf(buf, sizeof buf, "%9s", "-");
    return std::string(buf);
  };
  std::ostringstream os;
  char head[256];
  std::snprintf(head, sizeof head, "%-22s%9s%9s%9s%9s%9s%9s%9s%9s%9s%9s%9s%9s\n", "method", "IoU", "PA", "F1", "OSCC",
                "ESD", "CD", "R_E", "R_Ea", "R_Eq2", "R_W", "R_Wa", "R_Wq2");
  os << "signed mean errors (segmentation x100)\n" << head;
  for (const auto& [name, s] : rows) {
    char lead[32];
    std::snprintf(lead, sizeof lead, "%-22s", name.substr(0, 21).c_str());
    os << lead << cell(s->iou.mean(), 100) << cell(s->pa.mean(), 100) << cell(s->f1.mean(), 100)
       << cell(s->oscc.mean()) << cell(s->esd.mean()) << cell(s->cd_err.mean()) << cell(s->re.mean())
       << cell(s->rea.mean()) << cell(s->req2.mean()) << cell(s->rw.mean()) << cell(s->rwa.mean())
       << cell(s->rwq2.mean()) << "\n";
  }
  os << "\nmean absolute errors\n" << head;
  for (const auto& [name, s] : rows) {
    char lead[32];
    std::snprintf(lead, sizeof lead, "%-22s", name.substr(0, 21).c_str());
    os << lead << cell(s->iou.mean(), 100) << cell(s->pa.mean(), 100) << cell(s->f1.mean(), 100)
       << cell(s->oscc.mean()) << cell(s->esd.mean()) << cell(s->cd_err.abs_mean()) << cell(s->re.abs_mean())
       << cell(s->rea.abs_mean()) << cell(s->req2.abs_mean()) << cell(s->rw.abs_mean()) << cell(s->rwa.abs_mean())
       << cell(s->rwq2.abs_mean()) << "\n";
  }
  return os.str();
}

}  // namespace lithoseg::metrics
