#include <catch2/catch_amalgamated.hpp>

#include <fstream>
#include <sstream>

#include "curio/graph.hpp"
#include "curio/reference_programs.hpp"

using namespace curio;

static const EnvTypeBinding kImage = image_binding(4, 10, 10, 3);
static const EnvTypeBinding kVector = vector_binding(8, 3);
static const EnvTypeBinding kContinuous = vector_continuous_binding(4, 2);

TEST_CASE("FAST validates with 5 countable ops") {
  const ProgramGraph fast = build_reference_program("fast");
  for (const auto& b : {kImage, kVector, kContinuous}) {
    const auto r = validate_program(fast, b);
    REQUIRE(r.valid());
    REQUIRE(r.within_budget);
    REQUIRE_FALSE(r.input_independent);
    REQUIRE(r.dead_nodes.empty());
  }
  REQUIRE(countable_ops(fast) == 5);
}

TEST_CASE("RND counts 4 ops and derives the frozen module") {
  const ProgramGraph rnd = build_reference_program("rnd");
  REQUIRE(countable_ops(rnd) == 4);
  const auto r = validate_program(rnd, kVector);
  REQUIRE(r.valid());
  REQUIRE_FALSE(r.trainable_weights.at("w1"));  // frozen random net
  REQUIRE(r.trainable_weights.at("w2"));
}

TEST_CASE("cycle consistency trains exactly the backward and forward nets") {
  const ProgramGraph g = build_reference_program("cycle_consistency");
  const auto r = validate_program(g, kImage);
  REQUIRE(r.valid());
  REQUIRE_FALSE(r.trainable_weights.at("w1"));
  REQUIRE(r.trainable_weights.at("w2"));
  REQUIRE(r.trainable_weights.at("w3"));
}

TEST_CASE("op budget is reported") {
  // chain of 8 scalar ops exceeds the intrinsic budget of 7
  GraphBuilder b(ProgramKind::Intrinsic, "wide");
  b.input("a0", "action");
  b.op("z", "l2_distance", {"a0", "a0"});
  std::string prev = "z";
  for (int i = 0; i < 7; ++i) {
    std::string id = "n" + std::to_string(i);
    b.op(id, "subtract_one_tenth", {prev});
    prev = id;
  }
  const ProgramGraph g = b.output(prev);
  REQUIRE(countable_ops(g) == 8);
  const auto r = validate_program(g, kVector);
  REQUIRE(r.valid());
  REQUIRE_FALSE(r.within_budget);
  REQUIRE(r.budget == 7);
}

TEST_CASE("input-independent outputs are flagged but valid") {
  GraphBuilder b(ProgramKind::Intrinsic, "noise");
  b.op("n", "normal_distribution");
  const ProgramGraph g = b.output("n");
  const auto r = validate_program(g, kVector);
  REQUIRE(r.valid());
  REQUIRE(r.input_independent);
  REQUIRE(prune_input_independent(g));

  // still input independent when laundered through running_norm
  GraphBuilder b2(ProgramKind::Intrinsic, "noise2");
  b2.op("n", "normal_distribution");
  b2.op("rn", "running_norm", {"n"});
  REQUIRE(prune_input_independent(b2.output("rn")));

  REQUIRE_FALSE(prune_input_independent(build_reference_program("fast")));
}

TEST_CASE("typing failures carry diagnostics") {
  GraphBuilder b(ProgramKind::Intrinsic, "bad");
  b.input("s0", "state");
  b.op("n", "l2_norm", {"s0"});  // X cannot bind to S
  const auto r = validate_program(b.output("n"), kVector);
  REQUIRE_FALSE(r.valid());
  REQUIRE_FALSE(r.typing.ok);
  REQUIRE(r.typing.detail.find("l2_norm") != std::string::npos);
}

TEST_CASE("combiner inputs are not available to intrinsic programs") {
  GraphBuilder b(ProgramKind::Intrinsic, "bad");
  b.input("i", "intrinsic");
  const auto r = validate_program(b.output("i"), kVector);
  REQUIRE_FALSE(r.valid());
}

TEST_CASE("serialize matches the frozen FAST text") {
  std::ifstream in(std::string(CURIO_TEST_DATA_DIR) + "/fast_golden.prog");
  REQUIRE(in.good());
  std::stringstream ss;
  ss << in.rdbuf();
  REQUIRE(serialize(build_reference_program("fast")) == ss.str());
}

TEST_CASE("serialize round-trips every reference program bitwise") {
  for (const auto& name : reference_program_names()) {
    const ProgramGraph g = build_reference_program(name);
    const std::string text = serialize(g);
    const ProgramGraph back = deserialize(text);
    REQUIRE(back == g);
    REQUIRE(serialize(back) == text);
  }
}

TEST_CASE("parse errors report line and column") {
  // forward reference
  const std::string fwd =
      "program intrinsic t\n"
      "node x = l2_distance a0 a0\n"
      "node a0 = input action\n"
      "output x\n";
  try {
    deserialize(fwd);
    FAIL("expected ParseError");
  } catch (const ParseError& e) {
    REQUIRE(e.line == 2);
    REQUIRE(e.col > 1);
  }

  // unknown op
  const std::string unknown =
      "program intrinsic t\n"
      "node a0 = input action\n"
      "node x = warp_drive a0\n"
      "output x\n";
  try {
    deserialize(unknown);
    FAIL("expected ParseError");
  } catch (const ParseError& e) {
    REQUIRE(e.line == 3);
    REQUIRE(std::string(e.what()).find("warp_drive") != std::string::npos);
  }

  REQUIRE_THROWS_AS(deserialize("program intrinsic t\noutput x\n"), ParseError);
  REQUIRE_THROWS_AS(deserialize(""), ParseError);
}

TEST_CASE("comments and blank lines are accepted") {
  const std::string text =
      "# a trivial program\n"
      "program intrinsic t\n"
      "\n"
      "node a0 = input action  # the only input\n"
      "node x = l2_distance a0 a0\n"
      "output x\n";
  const ProgramGraph g = deserialize(text);
  REQUIRE(g.nodes.size() == 2);
  REQUIRE(countable_ops(g) == 1);
}

TEST_CASE("canonical keys ignore names, ids and declaration order") {
  const ProgramGraph rnd = build_reference_program("rnd");

  ProgramGraph renamed = rnd;
  renamed.name = "something_else";
  for (auto& n : renamed.nodes) n.id = "x_" + n.id;
  for (auto& n : renamed.nodes) {
    for (auto& p : n.parents) p = "x_" + p;
    if (!n.weight.empty()) n.weight = "x_" + n.weight;
  }
  renamed.output_node = "x_" + renamed.output_node;
  REQUIRE(canonical_key(renamed) == canonical_key(rnd));

  // declaration reorder: swap the two weights declarations
  ProgramGraph reordered = rnd;
  std::swap(reordered.nodes[1], reordered.nodes[2]);
  REQUIRE(canonical_key(reordered) == canonical_key(rnd));
}

TEST_CASE("canonical keys respect commutativity") {
  auto add_graph = [](bool swapped) {
    GraphBuilder b(ProgramKind::Intrinsic, "t");
    b.input("a0", "action");
    b.op("u", "l2_norm", {"a0"});
    b.op("v", "dot_product", {"a0", "a0"});
    if (swapped) b.op("s", "add", {"v", "u"});
    else b.op("s", "add", {"u", "v"});
    return b.output("s");
  };
  REQUIRE(canonical_key(add_graph(false)) == canonical_key(add_graph(true)));

  // subtraction is not commutative
  auto sub_graph = [](bool swapped) {
    GraphBuilder b(ProgramKind::Intrinsic, "t");
    b.input("a0", "action");
    b.op("u", "l2_norm", {"a0"});
    b.op("v", "dot_product", {"a0", "a0"});
    if (swapped) b.op("s", "subtract", {"v", "u"});
    else b.op("s", "subtract", {"u", "v"});
    return b.output("s");
  };
  REQUIRE_FALSE(canonical_key(sub_graph(false)) == canonical_key(sub_graph(true)));
}

TEST_CASE("canonical keys distinguish different programs") {
  const auto fast = canonical_key(build_reference_program("fast"));
  const auto rnd = canonical_key(build_reference_program("rnd"));
  REQUIRE_FALSE(fast == rnd);
  REQUIRE(fast.hash64 != rnd.hash64);

  // weight sharing matters: FAST with two separate nets is a different key
  GraphBuilder b(ProgramKind::Intrinsic, "fast_unshared");
  b.input("s0", "state");
  b.input("s1", "state_next");
  b.input("a0", "action");
  b.weights("w", "nn_s_to_a");
  b.weights("w2", "nn_s_to_a");
  b.apply("p1", "w", {"s1"});
  b.apply("p0", "w2", {"s0"});
  b.op("l", "action_loss", {"p1", "a0"});
  b.op("m", "minimize", {"l"});
  b.op("out", "l2_distance", {"p1", "p0"});
  REQUIRE_FALSE(canonical_key(b.output("out")) ==
                canonical_key(build_reference_program("fast")));
}

TEST_CASE("all reference programs validate under image and vector bindings") {
  for (const auto& name : reference_program_names()) {
    const ProgramGraph g = build_reference_program(name);
    for (const auto& binding : {kImage, kVector}) {
      const auto r = validate_program(g, binding);
      INFO(name);
      REQUIRE(r.valid());
    }
  }
  REQUIRE_THROWS_AS(build_reference_program("not_a_program"), std::invalid_argument);
}

TEST_CASE("countable op examples") {
  REQUIRE(countable_ops(build_reference_program("constant_zero")) == 1);
  REQUIRE(countable_ops(build_reference_program("gaussian_noise")) == 1);
  REQUIRE(countable_ops(build_reference_program("combiner_discovered")) == 4);
  REQUIRE(countable_ops(build_reference_program("combiner_intrinsic_only")) == 0);
}

TEST_CASE("combiner budget is 5") {
  const ProgramGraph g = build_reference_program("combiner_discovered");
  const auto r = validate_program(g, kVector);
  REQUIRE(r.valid());
  REQUIRE(r.budget == 5);
  REQUIRE(r.within_budget);
}
