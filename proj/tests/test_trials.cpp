#include <doctest.h>

#include <cmath>

#include "cvc/core/errors.hpp"
#include "cvc/core/random.hpp"
#include "cvc/extract/prompts.hpp"
#include "cvc/image/image.hpp"
#include "cvc/trials/trials.hpp"
#include "oracles.hpp"
#include "support.hpp"

using namespace cvc;
using namespace cvc::trials;
using nlohmann::json;

namespace {

TrialSet with_successes(const std::string& id, int n, const std::vector<int>& winners) {
  TrialSet set;
  set.instance_id = id;
  for (int j = 0; j < n; ++j) {
    Trial t;
    t.trial_index = j;
    t.rationale = "r" + std::to_string(j);
    t.success = std::find(winners.begin(), winners.end(), j) != winners.end();
    set.trials.push_back(t);
  }
  set.difficulty = difficulty(set);
  return set;
}

TrialSet with_k(const std::string& id, int n, int k) {
  std::vector<int> winners;
  for (int j = 0; j < k; ++j) winners.push_back(j);
  return with_successes(id, n, winners);
}

CVCInstance instance(const std::string& surface) {
  CVCInstance inst;
  inst.instance_id = "inst-" + surface;
  inst.entity = {surface, {0, surface.size()}, 0.5};
  inst.instruction = "What is the occluded object?";
  return inst;
}

}  // namespace

TEST_CASE("rationale prompt joins with one space") {
  CHECK(rationale_prompt("What is the occluded object?", "Let's think step by step") ==
        "What is the occluded object? Let's think step by step");
}

TEST_CASE("sample_trials returns N completions or fails") {
  const auto png = encode_png(Image(8, 8, {1, 2, 3}));
  auto cfg = validate_config(json::object());
  test::MockRig rig;
  CHECK(sample_trials(*rig.client, png, instance("bush"), cfg).size() == 16);
  cfg.n_trials = 1;
  CHECK(sample_trials(*rig.client, png, instance("bush"), cfg).size() == 1);

  services::MockScript short_script;
  short_script.vl_drop_last = true;
  test::MockRig short_rig(short_script);
  cfg.n_trials = 16;
  CHECK_THROWS_AS(sample_trials(*short_rig.client, png, instance("bush"), cfg), ProtocolError);
}

TEST_CASE("answer checking") {
  const auto cfg = validate_config(json::object());
  services::MockScript script;
  script.script_similarity("couch", "sofa", 0.85);
  script.script_similarity("loveseat", "sofa", 0.79);
  test::MockRig rig(script);

  CHECK(check_answer(*rig.client, {"monitor", "computer screen", "lamp"}, "lamp", cfg));
  CHECK(check_answer(*rig.client, {"LAMP"}, "lamp", cfg));
  CHECK(rig.transport->calls(ServiceKind::embed) == 0);  // exact matches short-circuit

  CHECK_FALSE(check_answer(*rig.client, {"unknown"}, "lamp", cfg));
  CHECK(rig.transport->calls(ServiceKind::embed) == 0);

  CHECK(check_answer(*rig.client, {"couch"}, "sofa", cfg));
  CHECK_FALSE(check_answer(*rig.client, {"loveseat"}, "sofa", cfg));
  CHECK(rig.transport->calls(ServiceKind::embed) == 2);
}

TEST_CASE("tau is inclusive") {
  auto cfg = validate_config(json::object());
  services::MockScript script;
  script.script_similarity("couch", "sofa", 0.85);
  test::MockRig rig(script);
  const auto v = services::embed(*rig.client, {"couch", "sofa"});
  const double c = cosine(v[0], v[1]);
  CHECK(c == doctest::Approx(0.85).epsilon(1e-9));
  cfg.similarity_tau = c;
  CHECK(check_answer(*rig.client, {"couch"}, "sofa", cfg));
  cfg.similarity_tau = std::nextafter(c, 2.0);
  CHECK_FALSE(check_answer(*rig.client, {"couch"}, "sofa", cfg));
}

TEST_CASE("difficulty arithmetic") {
  CHECK(with_k("a", 16, 4).difficulty.value() == 0.75);
  CHECK(with_k("a", 16, 0).difficulty.value() == 1.0);
  CHECK(with_k("a", 16, 16).difficulty.value() == 0.0);
  CHECK(with_k("a", 16, 4).difficulty == Difficulty{12, 16});
  CHECK_THROWS_AS(difficulty(TrialSet{}), ContractViolation);

  Rng rng(1);
  for (int i = 0; i < 500; ++i) {
    const int n = static_cast<int>(uniform_int(rng, 1, 32));
    std::vector<bool> flags(static_cast<std::size_t>(n));
    for (std::size_t j = 0; j < flags.size(); ++j) flags[j] = uniform_unit(rng) < 0.3;
    const std::unique_ptr<bool[]> raw(new bool[flags.size()]);
    std::copy(flags.begin(), flags.end(), raw.get());
    const auto f = difficulty_from_flags(std::span<const bool>(raw.get(), flags.size()));
    CHECK(f.failures == oracle::count_failures(flags));
    CHECK(f.n == n);
  }
}

TEST_CASE("selection keeps k in 1..3 for N = 16") {
  const auto cfg = validate_config(json::object());
  std::vector<TrialSet> sets;
  for (int k = 0; k <= 16; ++k) sets.push_back(with_k("k" + std::to_string(k), 16, k));
  const auto selected = select_instances(sets, cfg);
  std::vector<std::string> ids;
  for (const auto& s : selected) ids.push_back(s.instance_id);
  CHECK(ids == std::vector<std::string>{"k1", "k2", "k3"});
  for (const auto& s : selected) {
    REQUIRE(s.chosen_trial_index.has_value());
    CHECK(s.trials.at(static_cast<std::size_t>(*s.chosen_trial_index)).success);
  }
}

TEST_CASE("non-strict alpha admits the boundary") {
  auto cfg = validate_config({{"alpha_strict", false}});
  const auto selected = select_instances({with_k("k4", 16, 4)}, cfg);
  CHECK(selected.size() == 1);
}

TEST_CASE("chosen trial is seeded and uniform over successes") {
  auto cfg = validate_config({{"seed", 4}});
  const auto set = with_successes("x", 16, {2, 9, 14});
  const auto a = select_instances({set}, cfg);
  CHECK(select_instances({set}, cfg)[0].chosen_trial_index == a[0].chosen_trial_index);

  std::map<int, int> counts;
  for (int s = 0; s < 3000; ++s) {
    cfg.seeds.selection = static_cast<std::uint64_t>(s);
    ++counts[*select_instances({set}, cfg)[0].chosen_trial_index];
  }
  CHECK(counts.size() == 3);
  for (const auto& [idx, c] : counts) CHECK(std::abs(c - 1000) < 120);
}

TEST_CASE("judge_trials records parse failures as unsuccessful") {
  auto cfg = validate_config(json::object());
  services::MockScript script;
  const auto bad = "The answer is unclear.";
  script.script_text(extract::prompt_template(extract::PromptName::answer_extraction).render(bad), {"no markers"});
  test::MockRig rig(script);
  const auto set = judge_trials(*rig.client, instance("lamp"),
                                {"It must be a lamp. Final answer: lamp.", bad, "Final answer: unknown."}, cfg);
  REQUIRE(set.trials.size() == 3);
  CHECK(set.trials[0].success);
  CHECK(set.trials[0].extracted_answers == std::vector<std::string>{"lamp"});
  CHECK_FALSE(set.trials[1].success);
  CHECK(set.trials[1].note.find("answer extraction failed") != std::string::npos);
  CHECK_FALSE(set.trials[2].success);
  CHECK(set.difficulty == Difficulty{2, 3});
}

TEST_CASE("embed outage fails the trial conservatively") {
  auto cfg = validate_config(json::object());
  test::MockRig rig;
  rig.transport->fail_next(ServiceKind::embed, {500, 500, 500});
  const auto set = judge_trials(*rig.client, instance("sofa"), {"Final answer: couch."}, cfg);
  CHECK_FALSE(set.trials[0].success);
  CHECK(set.trials[0].note.find("answer check failed") != std::string::npos);
}
