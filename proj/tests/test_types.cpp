#include <catch2/catch_amalgamated.hpp>

#include <fstream>

#include "curio/types.hpp"

using namespace curio;

static std::vector<std::string> golden_lines() {
  std::ifstream in(std::string(CURIO_TEST_DATA_DIR) + "/registry_golden.txt");
  REQUIRE(in.good());
  std::vector<std::string> lines;
  std::string l;
  while (std::getline(in, l)) {
    if (l.empty() || l[0] == '#') continue;
    lines.push_back(l);
  }
  return lines;
}

TEST_CASE("registry matches the golden transcription line for line") {
  std::vector<std::string> got;
  for (const auto& op : list_operations(Vocab::Curiosity))
    got.push_back(describe_signature(op));
  for (const auto& op : list_operations(Vocab::Combiner))
    got.push_back(describe_signature(op));
  const auto want = golden_lines();
  REQUIRE(got.size() == want.size());
  for (size_t i = 0; i < want.size(); ++i) REQUIRE(got[i] == want[i]);
}

TEST_CASE("registry spot checks") {
  const auto& cur = list_operations(Vocab::Curiosity);
  REQUIRE(cur.size() == 32);
  REQUIRE(list_operations(Vocab::Combiner).size() == 15);

  const OperationSignature* minimize = find_operation("minimize", Vocab::Curiosity);
  REQUIRE(minimize != nullptr);
  REQUIRE(minimize->state == OpState::Adam);
  REQUIRE(minimize->inputs.size() == 1);
  REQUIRE(minimize->inputs[0] == t_real());
  REQUIRE(!minimize->output.has_value());
  REQUIRE(minimize->is_update_module);

  const OperationSignature* c001 = find_operation("const_0_01", Vocab::Combiner);
  REQUIRE(c001 != nullptr);
  REQUIRE(c001->const_value == 0.01);

  int detach_count = 0;
  for (const auto& op : cur)
    if (op.name == "detach") {
      ++detach_count;
      REQUIRE(op.inputs.size() == 1);
      REQUIRE(*op.output == op.inputs[0]);
    }
  REQUIRE(detach_count == 1);

  int nn_applies = 0, ensembles = 0;
  for (const auto& op : cur)
    if (op.is_network) (op.ensemble ? ensembles : nn_applies) += 1;
  REQUIRE(nn_applies == 7);
  REQUIRE(ensembles == 4);

  REQUIRE_THROWS_AS(parse_vocab("signals"), std::invalid_argument);
}

TEST_CASE("check_types subtyping and arity") {
  const OperationSignature* add = find_operation("add", Vocab::Curiosity);
  // R+ unifies where R is required
  auto r = check_types({t_pos(), t_real()}, *add);
  REQUIRE(r.ok);
  // the converse is rejected
  const OperationSignature* sa = find_operation("sqrt_abs", Vocab::Curiosity);
  OperationSignature wants_pos = *sa;
  wants_pos.inputs = {t_pos()};
  REQUIRE_FALSE(check_types({t_real()}, wants_pos).ok);
  REQUIRE(check_types({t_pos()}, wants_pos).ok);

  const OperationSignature* l2d = find_operation("l2_distance", Vocab::Curiosity);
  auto arity = check_types({t_real()}, *l2d);
  REQUIRE_FALSE(arity.ok);
  REQUIRE(arity.diagnostic.find("arity") != std::string::npos);

  const OperationSignature* dot = find_operation("dot_product", Vocab::Curiosity);
  auto mixed = check_types({t_feature(), t_action()}, *dot);
  REQUIRE_FALSE(mixed.ok);
  REQUIRE(mixed.position == 1);
  auto uniform = check_types({t_feature(), t_feature()}, *dot);
  REQUIRE(uniform.ok);
  REQUIRE(uniform.x_binding == Ty::Feature);

  // states never unify with X
  const OperationSignature* l2n = find_operation("l2_norm", Vocab::Curiosity);
  REQUIRE_FALSE(check_types({t_state()}, *l2n).ok);
}

TEST_CASE("check_types X unification oracle on the two-element lattice") {
  // brute force over all (X,X) input combinations: ok iff both in {F,A} and equal
  const OperationSignature* dot = find_operation("dot_product", Vocab::Curiosity);
  const std::vector<SemanticType> all = {t_real(), t_pos(), t_state(), t_action(),
                                         t_feature()};
  for (const auto& a : all)
    for (const auto& b : all) {
      const bool want = (a.base == Ty::Feature || a.base == Ty::Action) &&
                        a.base == b.base;
      REQUIRE(check_types({a, b}, *dot).ok == want);
    }
}

TEST_CASE("resolve_signature picks CNN or MLP by state form") {
  const OperationSignature* nn = find_operation("nn_s_to_f", Vocab::Curiosity);
  const auto img = resolve_signature(*nn, image_binding(4, 10, 10, 3));
  REQUIRE(img.arch.kind == NetworkArch::Kind::Cnn);
  REQUIRE(img.output_shape == std::vector<int>{32});

  const auto vec = resolve_signature(*nn, vector_binding(8, 3));
  REQUIRE(vec.arch.kind == NetworkArch::Kind::Mlp);
  REQUIRE(vec.arch.mlp.in == 8);
  REQUIRE(vec.arch.mlp.out == 32);
  REQUIRE(vec.arch.mlp.hidden == 64);
}

TEST_CASE("resolve_signature handles action losses per action form") {
  const OperationSignature* al = find_operation("action_loss", Vocab::Curiosity);
  const auto disc = resolve_signature(*al, vector_binding(8, 3));
  REQUIRE(disc.action_loss_discrete);
  const auto cont = resolve_signature(*al, vector_continuous_binding(4, 2));
  REQUIRE_FALSE(cont.action_loss_discrete);
}

TEST_CASE("resolve_signature is pure") {
  const OperationSignature* nn = find_operation("nn_f_f_to_a", Vocab::Curiosity);
  const auto binding = vector_binding(6, 4);
  const auto a = resolve_signature(*nn, binding);
  const auto b = resolve_signature(*nn, binding);
  REQUIRE(a.arch.mlp.in == b.arch.mlp.in);
  REQUIRE(a.arch.mlp.in == 64);
  REQUIRE(a.arch.mlp.out == 4);
  REQUIRE(a.input_shapes == b.input_shapes);
}

TEST_CASE("resolve_signature rejects bad bindings") {
  EnvTypeBinding bad = vector_binding(8, 3);
  bad.action.n = 1;
  const OperationSignature* nn = find_operation("nn_s_to_f", Vocab::Curiosity);
  REQUIRE_THROWS_AS(resolve_signature(*nn, bad), std::invalid_argument);
  EnvTypeBinding bad2 = vector_binding(0, 3);
  REQUIRE_THROWS_AS(resolve_signature(*nn, bad2), std::invalid_argument);
  EnvTypeBinding bad3 = vector_binding(8, 3);
  bad3.feature_dim = 16;
  REQUIRE_THROWS_AS(resolve_signature(*nn, bad3), std::invalid_argument);
}

TEST_CASE("lift_to_list maps one input and the output") {
  const OperationSignature* l2n = find_operation("l2_norm", Vocab::Curiosity);
  const auto lifted = lift_to_list(*l2n, 0);
  REQUIRE(lifted.inputs[0].is_list);
  REQUIRE(lifted.output->is_list);
  // the lifted norm unifies with the mapped_l2_norm table row (R+ <= R)
  const OperationSignature* mapped = find_operation("mapped_l2_norm", Vocab::Curiosity);
  REQUIRE(mapped->inputs[0] == lifted.inputs[0]);
  REQUIRE(mapped->output->is_list == lifted.output->is_list);
  REQUIRE((mapped->output->base == Ty::Real && lifted.output->base == Ty::PosReal));

  const OperationSignature* det = find_operation("detach", Vocab::Curiosity);
  const auto ldet = lift_to_list(*det, 0);
  REQUIRE(ldet.inputs[0] == t_list(t_x()));
  REQUIRE(*ldet.output == t_list(t_x()));

  REQUIRE_THROWS_AS(lift_to_list(*mapped, 0), std::invalid_argument);
  REQUIRE_THROWS_AS(lift_to_list(*l2n, 3), std::invalid_argument);
}

TEST_CASE("list nesting is rejected") {
  REQUIRE_THROWS_AS(t_list(t_list(t_real())), std::invalid_argument);
}
