#include "vpt/report.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <map>
#include <set>
#include <tuple>

#include <json.hpp>

#include "vpt/error.hpp"
#include "vpt/format.hpp"

namespace vpt {
namespace {

using ojson = nlohmann::ordered_json;

struct Participant {
  std::string id;
  AgeGroup group = AgeGroup::younger;
  // [site][modality]; NaN when missing.
  std::array<std::array<double, 3>, 6> values{};
};

std::size_t site_index(BodySite s) { return static_cast<std::size_t>(s); }
std::size_t modality_index(Modality m) { return static_cast<std::size_t>(m); }

stats::SummaryMode summary_mode(Modality m) {
  return m == Modality::monofilament ? stats::SummaryMode::discrete : stats::SummaryMode::continuous;
}

/// Expected direction of "x perceives better than y" for each modality: lower
/// intensity and force thresholds, longer fork times.
stats::Alternative better_alternative(Modality m) {
  return m == Modality::tuning_fork ? stats::Alternative::greater : stats::Alternative::less;
}

std::vector<Participant> collect(const std::vector<SiteMeasurement>& measurements) {
  std::vector<Participant> out;
  std::map<std::string, std::size_t> index;
  const double nan = std::numeric_limits<double>::quiet_NaN();
  for (const auto& m : measurements) {
    if (m.excluded) continue;
    auto [it, inserted] = index.try_emplace(m.participant_id, out.size());
    if (inserted) {
      Participant p;
      p.id = m.participant_id;
      p.group = m.age_group;
      for (auto& row : p.values) row.fill(nan);
      out.push_back(std::move(p));
    }
    out[it->second].values[site_index(m.site)][modality_index(m.modality)] = m.value;
  }
  return out;
}

std::vector<double> column(const std::vector<Participant>& ps, BodySite site, Modality m,
                           std::optional<AgeGroup> group) {
  std::vector<double> out;
  for (const auto& p : ps) {
    if (group && p.group != *group) continue;
    out.push_back(p.values[site_index(site)][modality_index(m)]);
  }
  return out;
}

std::string site_label(BodySite s) { return std::string(site_code(s)); }

Comparison site_comparison(const std::vector<Participant>& ps, Modality m, const AnalysisConfig& cfg) {
  Comparison c;
  c.kind = ComparisonKind::site;
  c.modality = m;
  c.site = cfg.finger;
  c.x_label = site_label(cfg.finger);
  c.y_label = site_label(cfg.toe);
  c.alternative = better_alternative(m);
  c.comparisons = cfg.site_comparisons;
  const auto paired = stats::drop_nan_pairs(column(ps, cfg.finger, m, std::nullopt),
                                            column(ps, cfg.toe, m, std::nullopt));
  c.n_x = c.n_y = paired.x.size();
  c.dropped = paired.dropped;
  try {
    if (m == Modality::monofilament) {
      auto r = stats::wilcoxon_signed_rank_one_sided(paired.x, paired.y, c.alternative,
                                                     cfg.signed_rank_exact_max_n);
      c.effect = stats::wilcoxon_r(r.z, r.n);
      c.result = stats::with_bonferroni(r, c.comparisons);
    } else {
      auto r = stats::t_test_one_sided(paired.x, paired.y, true, c.alternative);
      c.effect = stats::cohens_d(paired.x, paired.y);
      c.result = stats::with_bonferroni(r, c.comparisons);
    }
  } catch (const Error& e) {
    c.result.reset();
    c.effect.reset();
    c.skipped_reason = e.what();
  }
  return c;
}

Comparison age_comparison(const std::vector<Participant>& ps, Modality m, BodySite site,
                          const AnalysisConfig& cfg) {
  Comparison c;
  c.kind = ComparisonKind::age;
  c.modality = m;
  c.site = site;
  c.x_label = std::string(to_string(AgeGroup::younger));
  c.y_label = std::string(to_string(AgeGroup::older));
  c.alternative = better_alternative(m);
  c.comparisons = cfg.age_comparisons;
  const auto raw_x = column(ps, site, m, AgeGroup::younger);
  const auto raw_y = column(ps, site, m, AgeGroup::older);
  const auto x = stats::drop_nan(raw_x);
  const auto y = stats::drop_nan(raw_y);
  c.n_x = x.size();
  c.n_y = y.size();
  c.dropped = raw_x.size() - x.size() + raw_y.size() - y.size();
  try {
    if (m == Modality::monofilament) {
      auto r = stats::wilcoxon_rank_sum_one_sided(x, y, c.alternative, cfg.rank_sum_exact_max_n);
      c.effect = stats::wilcoxon_r(r.z, r.n);
      c.result = stats::with_bonferroni(r, c.comparisons);
    } else {
      auto r = stats::t_test_one_sided(x, y, false, c.alternative, cfg.unpaired_variant);
      c.effect = stats::cohens_d(x, y);
      c.result = stats::with_bonferroni(r, c.comparisons);
    }
  } catch (const Error& e) {
    c.result.reset();
    c.effect.reset();
    c.skipped_reason = e.what();
  }
  return c;
}

CorrelationRow correlation(const std::vector<Participant>& ps, Modality a, Modality b,
                           CorrelationMethod method, const std::vector<BodySite>& sites) {
  CorrelationRow row;
  row.a = a;
  row.b = b;
  row.method = method;
  row.sites = sites;
  std::vector<double> xa;
  std::vector<double> xb;
  const std::vector<BodySite> use = sites.empty() ? std::vector<BodySite>(kAllSites.begin(), kAllSites.end())
                                                  : sites;
  for (const auto& p : ps) {
    for (BodySite s : use) {
      xa.push_back(p.values[site_index(s)][modality_index(a)]);
      xb.push_back(p.values[site_index(s)][modality_index(b)]);
    }
  }
  const auto kept = stats::drop_nan_pairs(xa, xb);
  row.dropped = kept.dropped;
  try {
    if (method == CorrelationMethod::pearson) {
      for (std::size_t i = 0; i < kept.x.size(); ++i) {
        if (!std::isfinite(kept.x[i]) || !std::isfinite(kept.y[i])) {
          throw Error(ErrorKind::degenerate_sample, "Pearson correlation needs finite values");
        }
      }
      row.result = stats::pearson(kept.x, kept.y);
    } else {
      row.result = stats::spearman(kept.x, kept.y);
    }
  } catch (const Error& e) {
    row.result.reset();
    row.skipped_reason = e.what();
  }
  return row;
}

/// NaN and infinities have no JSON spelling.
ojson number(double v) { return std::isfinite(v) ? ojson(v) : ojson(nullptr); }

ojson summary_json(const SummaryCell& cell) {
  ojson j;
  j["site"] = site_code(cell.site);
  j["modality"] = to_string(cell.modality);
  j["group"] = cell.group ? ojson(to_string(*cell.group)) : ojson("all");
  j["dropped"] = cell.dropped;
  if (!cell.summary) {
    j["n"] = 0;
    return j;
  }
  const auto& s = *cell.summary;
  j["n"] = s.n;
  if (s.mode == stats::SummaryMode::continuous) {
    j["mean"] = number(s.mean);
    j["sd"] = number(s.sd);
  } else {
    j["median"] = number(s.median);
    j["q25"] = number(s.q25);
    j["q75"] = number(s.q75);
  }
  j["small_n"] = s.small_n;
  return j;
}

ojson comparison_json(const Comparison& c) {
  ojson j;
  j["kind"] = to_string(c.kind);
  j["modality"] = to_string(c.modality);
  j["site"] = site_code(c.site);
  j["x"] = c.x_label;
  j["y"] = c.y_label;
  j["alternative"] = stats::to_string(c.alternative);
  j["comparisons"] = c.comparisons;
  j["n_x"] = c.n_x;
  j["n_y"] = c.n_y;
  j["dropped"] = c.dropped;
  if (c.result) {
    const auto& r = *c.result;
    j["test"] = stats::to_string(r.method);
    j["statistic"] = number(r.statistic);
    if (r.method == stats::TestMethod::paired_t || r.method == stats::TestMethod::welch_t ||
        r.method == stats::TestMethod::pooled_t) {
      j["df"] = number(r.df);
    } else {
      j["z"] = number(r.z);
    }
    j["p_value"] = number(r.p_value);
    j["p_adjusted"] = r.p_adjusted ? number(*r.p_adjusted) : ojson(nullptr);
  } else {
    j["skipped"] = c.skipped_reason;
  }
  if (c.effect) {
    j["effect"] = {{"kind", stats::to_string(c.effect->kind)}, {"value", number(c.effect->value)}};
  }
  return j;
}

ojson correlation_json(const CorrelationRow& r) {
  ojson j;
  j["a"] = to_string(r.a);
  j["b"] = to_string(r.b);
  j["method"] = to_string(r.method);
  ojson sites = ojson::array();
  for (BodySite s : r.sites) sites.push_back(site_code(s));
  j["sites"] = r.sites.empty() ? ojson("all") : sites;
  j["dropped"] = r.dropped;
  if (r.result) {
    j["n"] = r.result->n;
    j["coefficient"] = number(r.result->coefficient);
    j["p_value"] = number(r.result->p_value);
  } else {
    j["skipped"] = r.skipped_reason;
  }
  return j;
}

std::string fmt(const char* pattern, double v) {
  if (std::isnan(v)) return "NaN";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[64];
  std::snprintf(buf, sizeof buf, pattern, v);
  return buf;
}

std::string pad(std::string s, std::size_t width) {
  if (s.size() < width) s.append(width - s.size(), ' ');
  return s;
}

std::string sites_label(const std::vector<BodySite>& sites) {
  if (sites.empty()) return "all";
  std::string out;
  for (BodySite s : sites) out += (out.empty() ? "" : "+") + site_label(s);
  return out;
}

}  // namespace

std::string_view to_string(ComparisonKind k) { return k == ComparisonKind::site ? "site" : "age"; }

std::string_view to_string(CorrelationMethod m) {
  return m == CorrelationMethod::pearson ? "pearson" : "spearman";
}

StudyReport analyze_study(const std::vector<SiteMeasurement>& measurements, const AnalysisConfig& config) {
  const auto participants = collect(measurements);
  if (participants.empty()) throw Error(ErrorKind::empty_input, "no retained measurements to analyze");

  StudyReport report;
  report.participants_retained = participants.size();
  for (const auto& p : participants) {
    (p.group == AgeGroup::younger ? report.participants_younger : report.participants_older)++;
  }

  std::set<std::string> seen;
  for (const auto& m : measurements) {
    if (m.excluded && seen.insert(m.participant_id).second) {
      report.exclusions.push_back({m.participant_id, m.age_group, m.exclusion_reason});
    }
  }

  for (BodySite site : kAllSites) {
    for (Modality m : kAllModalities) {
      for (std::optional<AgeGroup> group :
           {std::optional<AgeGroup>{}, std::optional{AgeGroup::younger}, std::optional{AgeGroup::older}}) {
        SummaryCell cell;
        cell.site = site;
        cell.modality = m;
        cell.group = group;
        const auto raw = column(participants, site, m, group);
        const auto kept = stats::drop_nan(raw);
        cell.dropped = raw.size() - kept.size();
        if (!kept.empty()) cell.summary = stats::group_summary(kept, summary_mode(m));
        report.summaries.push_back(std::move(cell));
      }
    }
  }

  for (Modality m : kAllModalities) report.comparisons.push_back(site_comparison(participants, m, config));
  for (Modality m : kAllModalities) {
    for (BodySite site : {config.finger, config.toe}) {
      report.comparisons.push_back(age_comparison(participants, m, site, config));
    }
  }

  const std::vector<BodySite> subset{config.finger, config.toe};
  for (const std::vector<BodySite>& sites : {std::vector<BodySite>{}, subset}) {
    report.correlations.push_back(correlation(participants, Modality::smartphone, Modality::tuning_fork,
                                              CorrelationMethod::pearson, sites));
    report.correlations.push_back(correlation(participants, Modality::smartphone, Modality::monofilament,
                                              CorrelationMethod::spearman, sites));
    report.correlations.push_back(correlation(participants, Modality::monofilament, Modality::tuning_fork,
                                              CorrelationMethod::spearman, sites));
  }
  return report;
}

std::string report_to_json(const StudyReport& report) {
  ojson j;
  j["participants"] = {{"retained", report.participants_retained},
                       {"younger", report.participants_younger},
                       {"older", report.participants_older},
                       {"excluded", report.exclusions.size()}};
  ojson ex = ojson::array();
  for (const auto& e : report.exclusions) {
    ex.push_back({{"participant_id", e.participant_id}, {"age_group", to_string(e.age_group)}, {"reason", e.reason}});
  }
  j["exclusions"] = ex;
  ojson summaries = ojson::array();
  for (const auto& s : report.summaries) summaries.push_back(summary_json(s));
  j["summaries"] = summaries;
  ojson comparisons = ojson::array();
  for (const auto& c : report.comparisons) comparisons.push_back(comparison_json(c));
  j["comparisons"] = comparisons;
  ojson correlations = ojson::array();
  for (const auto& c : report.correlations) correlations.push_back(correlation_json(c));
  j["correlations"] = correlations;
  return j.dump(2) + "\n";
}

std::string report_to_table(const StudyReport& report) {
  std::string out;
  out += "Participants retained: " + std::to_string(report.participants_retained) + " (younger " +
         std::to_string(report.participants_younger) + ", older " + std::to_string(report.participants_older) +
         "), excluded: " + std::to_string(report.exclusions.size()) + "\n";
  for (const auto& e : report.exclusions) {
    out += "  " + pad(e.participant_id, 6) + pad(std::string(to_string(e.age_group)), 9) + e.reason + "\n";
  }

  out += "\nSummaries (mean +- sd; monofilament median [q25, q75])\n";
  out += pad("site", 6) + pad("modality", 14) + pad("group", 9) + pad("n", 5) + "value\n";
  for (const auto& s : report.summaries) {
    std::string value = "-";
    std::string n = "0";
    if (s.summary) {
      const auto& g = *s.summary;
      n = std::to_string(g.n);
      value = g.mode == stats::SummaryMode::continuous
                  ? fmt("%.3f", g.mean) + " +- " + fmt("%.3f", g.sd)
                  : fmt("%.3g", g.median) + " [" + fmt("%.3g", g.q25) + ", " + fmt("%.3g", g.q75) + "]";
    }
    if (s.dropped > 0) value += "  (" + std::to_string(s.dropped) + " NaN dropped)";
    out += pad(site_label(s.site), 6) + pad(std::string(to_string(s.modality)), 14) +
           pad(s.group ? std::string(to_string(*s.group)) : "all", 9) + pad(n, 5) + value + "\n";
  }

  out += "\nComparisons\n";
  out += pad("kind", 5) + pad("modality", 14) + pad("x vs y", 22) + pad("alt", 8) + pad("test", 28) +
         pad("stat", 10) + pad("p", 11) + pad("p_adj(m)", 15) + "effect\n";
  for (const auto& c : report.comparisons) {
    std::string who = c.kind == ComparisonKind::site ? c.x_label + " vs " + c.y_label
                                                     : c.x_label + " vs " + c.y_label + " @" + site_label(c.site);
    out += pad(std::string(to_string(c.kind)), 5) + pad(std::string(to_string(c.modality)), 14) + pad(who, 22) +
           pad(std::string(stats::to_string(c.alternative)), 8);
    if (c.result) {
      const auto& r = *c.result;
      out += pad(std::string(stats::to_string(r.method)), 28) + pad(fmt("%.3f", r.statistic), 10) +
             pad(fmt("%.3e", r.p_value), 11) +
             pad(fmt("%.3e", r.p_adjusted.value_or(r.p_value)) + "(" + std::to_string(c.comparisons) + ")", 15);
      if (c.effect) out += std::string(c.effect->kind == stats::EffectKind::cohens_d ? "d=" : "r=") + fmt("%.3f", c.effect->value);
    } else {
      out += "skipped: " + c.skipped_reason;
    }
    out += "\n";
  }

  out += "\nCorrelations\n";
  out += pad("pair", 28) + pad("method", 10) + pad("sites", 7) + pad("n", 6) + pad("coef", 9) + "p\n";
  for (const auto& r : report.correlations) {
    out += pad(std::string(to_string(r.a)) + " ~ " + std::string(to_string(r.b)), 28) +
           pad(std::string(to_string(r.method)), 10) + pad(sites_label(r.sites), 7);
    if (r.result) {
      out += pad(std::to_string(r.result->n), 6) + pad(fmt("%.3f", r.result->coefficient), 9) +
             fmt("%.3e", r.result->p_value);
    } else {
      out += "skipped: " + r.skipped_reason;
    }
    out += "\n";
  }
  return out;
}

}  // namespace vpt
