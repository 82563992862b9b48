#include <catch2/catch_amalgamated.hpp>

#include "cmdbattle/branch.hpp"
#include "cmdbattle/branch_json.hpp"
#include "support/branch_gen.hpp"

using namespace cmdbattle;

namespace {

Predicate pred(std::string_view text) { return parse_predicate(text); }

// Builds `levels` conditions nested through their then-arms.
BehaviorBranch nested_conditions(int levels) {
  std::vector<Node> inner;
  for (int i = 0; i < levels; ++i) {
    std::vector<Node> wrapped;
    wrapped.push_back(condition(pred("self_hp > 0"), std::move(inner), {}));
    inner = std::move(wrapped);
  }
  return BehaviorBranch{std::move(inner)};
}

}  // namespace

TEST_CASE("minimal branch validates", "[branch]") {
  BehaviorBranch b{{action(ActionName::thunderbolt)}};
  CHECK(validate(b).ok());
}

TEST_CASE("arity violations name the node path", "[branch]") {
  BehaviorBranch b{{action(ActionName::move_to, {1.0})}};
  auto report = validate(b);
  REQUIRE(report.violations.size() == 1);
  CHECK(report.violations[0].path == "nodes[0]");
  CHECK(report.violations[0].rule == "move_to arity 2, got 1");

  BehaviorBranch nested{{condition(pred("self_hp < 50"), {action(ActionName::retreat)},
                                   {action(ActionName::idle), action(ActionName::tackle, {3})})}};
  report = validate(nested);
  REQUIRE(report.violations.size() == 2);
  CHECK(report.violations[0].path == "nodes[0].else[0]");
  CHECK(report.violations[0].rule == "idle arity 1, got 0");
  CHECK(report.violations[1].path == "nodes[0].else[1]");
}

TEST_CASE("depth is counted from the root list", "[branch]") {
  // Depth is an independent count: level k of the nesting sits at depth k.
  for (int levels = 1; levels <= 10; ++levels) {
    auto b = nested_conditions(levels);
    CHECK(branch_depth(b.nodes) == levels);
  }
  CHECK(validate(nested_conditions(8)).ok());
  auto report = validate(nested_conditions(9));
  REQUIRE_FALSE(report.ok());
  CHECK(report.violations[0].rule == "depth 9 > 8");
  CHECK(report.violations[0].path == "nodes[0].then[0].then[0].then[0].then[0].then[0].then[0].then[0].then[0]");
}

TEST_CASE("node cap and emptiness", "[branch]") {
  CHECK(validate(BehaviorBranch{}).violations[0].rule == "branch has no nodes");
  BehaviorBranch b;
  for (int i = 0; i < 64; ++i) b.nodes.push_back(action(ActionName::tackle));
  CHECK(validate(b).ok());
  b.nodes.push_back(control(ControlName::end));
  CHECK(validate(b).violations[0].rule == "node count 65 > 64");
}

TEST_CASE("idle needs a positive duration", "[branch]") {
  CHECK_FALSE(validate(BehaviorBranch{{action(ActionName::idle, {0.0})}}).ok());
  CHECK_FALSE(validate(BehaviorBranch{{action(ActionName::idle, {-1.0})}}).ok());
  CHECK(validate(BehaviorBranch{{action(ActionName::idle, {0.5})}}).ok());
}

TEST_CASE("predicate rules", "[branch][predicate]") {
  auto deep = pred("not not not not not distance_to_opponent < 3");
  CHECK(predicate_depth(deep) == 6);
  CHECK(validate(BehaviorBranch{{condition(deep, {}, {})}}).ok());
  auto deeper = Predicate::negate(deep);
  auto report = validate(BehaviorBranch{{condition(deeper, {}, {})}});
  REQUIRE_FALSE(report.ok());
  CHECK(report.violations[0].path == "nodes[0].pred");
  CHECK(report.violations[0].rule == "predicate depth 7 > 6");

  auto lonely_and = Predicate::all_of({pred("self_hp > 3")});
  CHECK_FALSE(validate(BehaviorBranch{{condition(lonely_and, {}, {})}}).ok());
  CHECK_FALSE(validate(BehaviorBranch{{condition(Predicate::flag_of(SensorVariable::self_hp), {}, {})}}).ok());
}

TEST_CASE("validation accepts generated branches and rejects single-rule mutations", "[branch][property]") {
  testing::BranchGen gen(11);
  for (int i = 0; i < 300; ++i) {
    BehaviorBranch b = gen.branch();
    REQUIRE(validate(b).ok());
    CHECK(validate(b).violations == validate(b).violations);

    // Break exactly one rule and expect exactly one complaint.
    BehaviorBranch broken = b;
    switch (i % 3) {
      case 0:
        broken.nodes.push_back(action(ActionName::move_to, {1.0}));
        break;
      case 1:
        broken.nodes.push_back(action(ActionName::idle, {-0.5}));
        break;
      case 2:
        broken.nodes.push_back(condition(Predicate::negate(pred("not not not not not self_hp < 1")), {}, {}));
        break;
    }
    if (count_nodes(broken) > kMaxBranchNodes) continue;
    auto report = validate(broken);
    REQUIRE(report.violations.size() == 1);
    CHECK(report.violations[0].path.rfind("nodes[" + std::to_string(broken.nodes.size() - 1) + "]", 0) == 0);
  }
}

TEST_CASE("json encoding follows the schema", "[json]") {
  CHECK(encode_json(BehaviorBranch{{control(ControlName::end)}}) == R"({"nodes":[{"kind":"control","name":"end"}]})");
  CHECK(encode_json(BehaviorBranch{{action(ActionName::move_to, {3, -2.5}), action(ActionName::tackle)}}) ==
        R"({"nodes":[{"kind":"action","name":"move_to","args":[3.0,-2.5]},{"kind":"action","name":"tackle","args":[]}]})");
  BehaviorBranch c{{condition(pred("distance_to_opponent < 6"), {action(ActionName::retreat)}, {})}};
  CHECK(encode_json(c) ==
        R"({"nodes":[{"kind":"condition","pred":"distance_to_opponent < 6","then":[{"kind":"action","name":"retreat","args":[]}],"else":[]}]})");
}

TEST_CASE("json decode errors carry schema paths", "[json]") {
  auto fails_with = [](std::string_view text, std::string_view fragment) {
    try {
      decode_json(text);
      FAIL("decode should fail: " << text);
    } catch (const DecodeError& e) {
      INFO(e.what());
      CHECK(std::string(e.what()).find(fragment) != std::string::npos);
    }
  };
  fails_with(R"({"nodes":[{"kind":"action","name":"fly"}]})", "unknown action 'fly'");
  fails_with(R"({"nodes":[{"kind":"action","name":"fly"}]})", "nodes[0].name");
  fails_with(R"({"nodes":[{"kind":"jump"}]})", "nodes[0].kind: unknown kind 'jump'");
  fails_with(R"({"nodes":[{"kind":"action","name":"tackle"}]})", "nodes[0]: missing field 'args'");
  fails_with(R"({"nodes":[{"kind":"action","name":"move_to","args":[1]}]})", "move_to arity 2, got 1");
  fails_with(R"({"nodes":[{"kind":"condition","pred":"hp < 3","then":[],"else":[]}]})", "unknown sensor 'hp'");
  fails_with(R"({"nodes":[{"kind":"condition","pred":"self_hp < 3","then":[]}]})", "missing field 'else'");
  fails_with(R"({"nodes":[]})", "branch has no nodes");
  fails_with(R"({"nodes":[)", "invalid JSON");
}

TEST_CASE("json round trip over generated branches", "[json][property]") {
  testing::BranchGen gen(2024);
  for (int i = 0; i < 200; ++i) {
    BehaviorBranch b = gen.branch();
    std::string text = encode_json(b);
    REQUIRE(decode_json(text) == b);
    CHECK(encode_json(b) == text);
  }
}
