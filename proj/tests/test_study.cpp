#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <map>
#include <set>

#include "pipeline.hpp"
#include "vpt/error.hpp"
#include "vpt/study.hpp"

namespace {

using testing_support::data_path;

vpt::CohortSpec small_spec(int n_young, int n_old) {
  vpt::CohortSpec s;
  s.younger.n = n_young;
  s.older.n = n_old;
  for (auto& site : s.younger.sites) site = {0.2, 0.05, 5.0, 1.0, -1.2, 0.2};
  for (auto& site : s.older.sites) site = {0.4, 0.05, 3.0, 1.0, -0.6, 0.2};
  return s;
}

vpt::StudyConfig study_config() {
  vpt::StudyConfig c;
  c.monofilaments = vpt::load_monofilament_set(data_path("monofilament_touch_test.json"));
  return c;
}

TEST(CohortSpec, LoadsCalibratedSpec) {
  const auto spec = vpt::load_cohort_spec(data_path("paper_calibrated.json"));
  EXPECT_EQ(spec.younger.n + spec.older.n, 36);
  EXPECT_EQ(spec.younger.n_equipment_change + spec.younger.n_high_false_positive +
                spec.older.n_equipment_change + spec.older.n_high_false_positive,
            8);
  const auto h1 = static_cast<std::size_t>(vpt::BodySite::H1);
  const auto f = static_cast<std::size_t>(vpt::BodySite::F);
  EXPECT_DOUBLE_EQ(spec.older.sites[f].alpha_mean, 0.47);
  EXPECT_DOUBLE_EQ(spec.older.sites[f].alpha_sd, 0.23);
  EXPECT_DOUBLE_EQ(spec.younger.sites[f].alpha_mean, 0.28);
  EXPECT_DOUBLE_EQ(spec.younger.sites[f].alpha_sd, 0.10);
  EXPECT_LT(spec.younger.sites[h1].alpha_mean, spec.younger.sites[f].alpha_mean);
}

TEST(CohortSpec, JsonRoundTrip) {
  const auto spec = vpt::load_cohort_spec(data_path("paper_calibrated.json"));
  const auto text = vpt::cohort_spec_to_json_text(spec);
  EXPECT_EQ(vpt::cohort_spec_to_json_text(vpt::cohort_spec_from_json_text(text)), text);
}

TEST(CohortSpec, RejectsInvalid) {
  auto s = small_spec(2, 2);
  s.younger.n = -1;
  EXPECT_THROW(s.validate(), vpt::Error);
  s = small_spec(2, 2);
  s.younger.n_equipment_change = 2;
  s.younger.n_high_false_positive = 1;
  EXPECT_THROW(s.validate(), vpt::Error);
  EXPECT_THROW(vpt::cohort_spec_from_json_text(R"({"groups": {}, "bogus": 1})"), vpt::Error);
}

TEST(Cohort, SameSeedSameCohort) {
  const auto spec = vpt::load_cohort_spec(data_path("paper_calibrated.json"));
  vpt::Rng a(5);
  vpt::Rng b(5);
  EXPECT_EQ(vpt::generate_cohort(spec, a), vpt::generate_cohort(spec, b));
}

TEST(Cohort, ZeroSpreadGivesIdenticalParticipants) {
  auto spec = small_spec(3, 0);
  for (auto& site : spec.younger.sites) site.alpha_sd = site.fork_time_sd = site.force_log10_sd = 0.0;
  vpt::Rng rng(1);
  const auto c = vpt::generate_cohort(spec, rng);
  ASSERT_EQ(c.size(), 3u);
  EXPECT_EQ(c[0].sites, c[1].sites);
  EXPECT_EQ(c[1].sites, c[2].sites);
  EXPECT_EQ(c[0].id, "P01");
  EXPECT_EQ(c[2].id, "P03");
}

TEST(Cohort, YoungerFirstAndFlagsAssigned) {
  auto spec = small_spec(4, 3);
  spec.younger.n_equipment_change = 1;
  spec.younger.n_high_false_positive = 2;
  vpt::Rng rng(1);
  const auto c = vpt::generate_cohort(spec, rng);
  ASSERT_EQ(c.size(), 7u);
  EXPECT_EQ(c[0].age_group, vpt::AgeGroup::younger);
  EXPECT_EQ(c[6].age_group, vpt::AgeGroup::older);
  EXPECT_TRUE(c[0].equipment_change);
  EXPECT_DOUBLE_EQ(c[1].false_positive_rate, spec.high_false_positive_rate);
  EXPECT_DOUBLE_EQ(c[3].false_positive_rate, spec.false_positive_rate);
}

TEST(Cohort, SampleMeansTrackSpec) {
  auto spec = small_spec(2000, 0);
  vpt::Rng rng(2);
  const auto c = vpt::generate_cohort(spec, rng);
  double sum = 0.0;
  for (const auto& p : c) sum += vpt::fifty_percent_point(p.sites[0].smartphone);
  EXPECT_NEAR(sum / c.size(), 0.2, 0.01);
}

TEST(VirtualStudy, EmptyCohortGivesNoMeasurements) {
  vpt::Rng rng(1);
  const auto run = vpt::run_virtual_study({}, study_config(), small_spec(0, 0), rng);
  EXPECT_TRUE(run.measurements.empty());
}

TEST(VirtualStudy, EighteenMeasurementsPerParticipant) {
  const auto spec = small_spec(2, 1);
  vpt::Rng rng(3);
  const auto cohort = vpt::generate_cohort(spec, rng);
  const auto run = vpt::run_virtual_study(cohort, study_config(), spec, rng);
  ASSERT_EQ(run.measurements.size(), 3u * 18u);
  ASSERT_EQ(run.logs.size(), 3u);
  std::map<std::string, int> per;
  for (const auto& m : run.measurements) ++per[m.participant_id];
  for (const auto& [id, n] : per) EXPECT_EQ(n, 18) << id;
  for (const auto& log : run.logs) {
    for (const auto& order : log.site_order) {
      EXPECT_EQ(std::set<vpt::BodySite>(order.begin(), order.end()).size(), 6u);
    }
  }
  // Older participants have higher smartphone thresholds on average here.
  double young = 0.0, old = 0.0;
  int ny = 0, no = 0;
  for (const auto& m : run.measurements) {
    if (m.modality != vpt::Modality::smartphone || std::isnan(m.value)) continue;
    (m.age_group == vpt::AgeGroup::younger ? young : old) += m.value;
    (m.age_group == vpt::AgeGroup::younger ? ny : no) += 1;
  }
  EXPECT_LT(young / ny, old / no);
}

TEST(VirtualStudy, MonofilamentValuesComeFromTheSet) {
  const auto spec = small_spec(3, 3);
  vpt::Rng rng(4);
  const auto cohort = vpt::generate_cohort(spec, rng);
  const auto config = study_config();
  const auto run = vpt::run_virtual_study(cohort, config, spec, rng);
  for (const auto& m : run.measurements) {
    if (m.modality != vpt::Modality::monofilament) continue;
    EXPECT_TRUE(std::isinf(m.value) || config.monofilaments.index_of(m.value).has_value()) << m.value;
  }
}

TEST(Exclusions, HighFalsePositiveParticipantsRemovedWholesale) {
  auto spec = small_spec(3, 2);
  spec.younger.n_high_false_positive = 1;
  spec.older.n_equipment_change = 1;
  vpt::Rng rng(6);
  const auto cohort = vpt::generate_cohort(spec, rng);
  const auto run = vpt::run_virtual_study(cohort, study_config(), spec, rng);
  const auto ex = vpt::apply_exclusions(run.measurements, {}, run.logs);
  std::set<std::string> excluded;
  for (const auto& m : ex.excluded) {
    excluded.insert(m.participant_id);
    EXPECT_FALSE(m.exclusion_reason.empty());
  }
  EXPECT_EQ(excluded, (std::set<std::string>{"P01", "P04"}));
  EXPECT_EQ(ex.excluded.size(), 36u);
  EXPECT_EQ(ex.retained.size(), 3u * 18u);

  vpt::ExclusionRule keep;
  keep.exclude_equipment_change = false;
  EXPECT_EQ(vpt::apply_exclusions(run.measurements, keep, run.logs).excluded.size(), 18u);
}

TEST(Exclusions, ThresholdIsStrictlyAboveLimit) {
  std::vector<vpt::SiteMeasurement> ms(1);
  ms[0].participant_id = "P01";
  std::vector<vpt::ParticipantLog> logs(1);
  logs[0].participant_id = "P01";
  logs[0].false_positives = {50, 3, 0};  // smartphone false positives do not count
  EXPECT_TRUE(vpt::apply_exclusions(ms, {}, logs).excluded.empty());
  logs[0].false_positives = {0, 2, 2};
  EXPECT_TRUE(vpt::apply_exclusions(ms, {}, logs).excluded.empty());
  logs[0].false_positives = {0, 0, 4};
  EXPECT_EQ(vpt::apply_exclusions(ms, {}, logs).excluded.size(), 1u);
}

TEST(Exclusions, CalibratedCohortRetains28Of36) {
  const auto spec = vpt::load_cohort_spec(data_path("paper_calibrated.json"));
  const auto out = testing_support::run_pipeline(spec, 1);
  EXPECT_EQ(out.report.participants_retained, 28u);
  EXPECT_EQ(out.report.exclusions.size(), 8u);
}

TEST(MeasurementsCsv, RoundTripWithSpecialValues) {
  const auto spec = small_spec(2, 2);
  vpt::Rng rng(7);
  const auto cohort = vpt::generate_cohort(spec, rng);
  auto run = vpt::run_virtual_study(cohort, study_config(), spec, rng);
  run.measurements[0].value = std::nan("");
  run.measurements[2].value = std::numeric_limits<double>::infinity();
  const auto marked = vpt::mark_exclusions(run.measurements, {}, run.logs);
  const auto csv = vpt::export_measurements_csv(marked);
  const auto back = vpt::import_measurements_csv(csv);
  EXPECT_EQ(back, marked);
  EXPECT_EQ(vpt::export_measurements_csv(back), csv);
  EXPECT_THROW(vpt::import_measurements_csv("nope\n"), vpt::Error);
}

TEST(StudyLog, JsonNamesEveryParticipant) {
  const auto spec = small_spec(2, 1);
  vpt::Rng rng(8);
  const auto cohort = vpt::generate_cohort(spec, rng);
  const auto run = vpt::run_virtual_study(cohort, study_config(), spec, rng);
  const auto json = vpt::export_study_log_json(run.logs);
  for (const auto& p : cohort) EXPECT_NE(json.find("\"" + p.id + "\""), std::string::npos);
}

TEST(Determinism, PipelineIsReproducible) {
  const auto spec = vpt::load_cohort_spec(data_path("paper_calibrated.json"));
  const auto a = testing_support::run_pipeline(spec, 11);
  const auto b = testing_support::run_pipeline(spec, 11);
  EXPECT_EQ(vpt::export_measurements_csv(a.marked), vpt::export_measurements_csv(b.marked));
  EXPECT_EQ(vpt::report_to_json(a.report), vpt::report_to_json(b.report));
  const auto c = testing_support::run_pipeline(spec, 12);
  EXPECT_NE(vpt::export_measurements_csv(a.marked), vpt::export_measurements_csv(c.marked));
}

}  // namespace
