#include <catch2/catch_amalgamated.hpp>

#include "cmdbattle/predicate.hpp"
#include "support/branch_gen.hpp"
#include "support/naive_eval.hpp"

using namespace cmdbattle;

TEST_CASE("predicate grammar", "[predicate]") {
  auto p = parse_predicate("distance_to_opponent < 6");
  CHECK(p == Predicate::compare(SensorVariable::distance_to_opponent, CompareOp::lt, 6.0));

  auto q = parse_predicate("self_x <= -2.5 or opponent_is_attacking");
  REQUIRE(q.kind == Predicate::Kind::any_of);
  CHECK(q.children[0] == Predicate::compare(SensorVariable::self_x, CompareOp::le, -2.5));
  CHECK(q.children[1] == Predicate::flag_of(SensorVariable::opponent_is_attacking));

  // `and` binds tighter than `or`; `not` applies to one comparison.
  auto r = parse_predicate("not self_hp > 1 and opponent_hp != 2 or elapsed_time >= 3");
  REQUIRE(r.kind == Predicate::Kind::any_of);
  REQUIRE(r.children[0].kind == Predicate::Kind::all_of);
  CHECK(r.children[0].children[0].kind == Predicate::Kind::negate);
  CHECK(predicate_depth(r) == 4);
}

TEST_CASE("predicate errors", "[predicate]") {
  CHECK_THROWS_AS(parse_predicate(""), PredicateError);
  CHECK_THROWS_WITH(parse_predicate("hp < 3"), "unknown sensor 'hp'");
  CHECK_THROWS_WITH(parse_predicate("self_hp"), "expected comparison operator, found end of predicate");
  CHECK_THROWS_AS(parse_predicate("self_hp < 3 and"), PredicateError);
  CHECK_THROWS_AS(parse_predicate("(self_hp < 3"), PredicateError);
  CHECK_THROWS_AS(parse_predicate("self_hp < 3 self_hp"), PredicateError);
  CHECK_THROWS_AS(parse_predicate("self_hp < 1.2.3"), PredicateError);
  try {
    parse_predicate("self_hp < 3 and bogus > 1");
  } catch (const PredicateError& e) {
    CHECK(e.column() == 16);
  }
}

TEST_CASE("predicate evaluation examples", "[predicate]") {
  SensorSnapshot s;
  s.distance_to_opponent = 16;
  CHECK_FALSE(eval_predicate(parse_predicate("distance_to_opponent < 6"), s));

  s.self_hp = 100;
  s.opponent_is_attacking = false;
  CHECK_FALSE(eval_predicate(parse_predicate("not (self_hp <= 0) and opponent_is_attacking == 1"), s));
  s.opponent_is_attacking = true;
  CHECK(eval_predicate(parse_predicate("not (self_hp <= 0) and opponent_is_attacking == 1"), s));
  CHECK(eval_predicate(parse_predicate("opponent_is_attacking"), s));
  CHECK(eval_predicate(parse_predicate("3 < 4"), s));
}

TEST_CASE("predicate evaluation agrees with a naive evaluator", "[predicate][property]") {
  testing::BranchGen gen(5);
  for (int i = 0; i < 2000; ++i) {
    Predicate p = gen.predicate(kMaxPredicateDepth);
    for (int k = 0; k < 5; ++k) {
      SensorSnapshot s = gen.snapshot();
      REQUIRE(eval_predicate(p, s) == testing::naive_eval(print_predicate(p), s));
    }
  }
}

TEST_CASE("predicate print/parse round trip", "[predicate][property]") {
  testing::BranchGen gen(6);
  for (int i = 0; i < 2000; ++i) {
    Predicate p = gen.predicate(1 + static_cast<int>(gen.pick(kMaxPredicateDepth)));
    std::string text = print_predicate(p);
    REQUIRE(parse_predicate(text) == p);
    CHECK(print_predicate(parse_predicate(text)) == text);
  }
}
