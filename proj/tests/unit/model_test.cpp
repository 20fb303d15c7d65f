#include <gtest/gtest.h>

#include <cmath>
#include <set>

#include "test_support.hpp"

namespace mf = medfact;
using mf::Matrix;
using mf::testing::random_matrix;

namespace {

mf::GruChannelParams zero_channel(std::size_t h) {
  mf::GruChannelParams p;
  p.w_z = p.w_r = p.w_h = p.b_z = p.b_r = p.b_h = Matrix(1, h);
  p.u_z = p.u_r = p.u_h = Matrix(h, h);
  return p;
}

mf::PatientRecord random_record(std::size_t t, std::size_t f, std::size_t s, mf::SeededRng& rng) {
  mf::PatientRecord r;
  r.id = "r";
  r.dynamic = random_matrix(t, f, rng, -2, 2);
  for (std::size_t j = 0; j < s; ++j) r.static_values.push_back(rng.normal());
  return r;
}

mf::ModelParams tiny_model(std::size_t f, std::size_t s, std::size_t h, std::size_t d, std::uint64_t seed) {
  mf::ModelDims dims{f, s, h, d, d, false};
  return mf::init_model(dims, seed);
}

}  // namespace

// Embedding -------------------------------------------------------------------------

TEST(Gru, ZeroParametersGiveZeroState) {
  const std::vector<double> series{1.0, -2.0, 3.5};
  EXPECT_EQ(mf::gru_forward(series, zero_channel(4)), Matrix(1, 4));
}

TEST(Gru, HandStep) {
  auto p = zero_channel(1);
  p.w_h = Matrix{{1.0}};
  const std::vector<double> series{1.0};
  EXPECT_NEAR(mf::gru_forward(series, p)(0, 0), 0.5 * std::tanh(1.0), 1e-15);
  EXPECT_NEAR(mf::gru_forward(series, p)(0, 0), 0.380797, 1e-6);
}

TEST(Gru, EmptySeriesIsContractError) {
  EXPECT_THROW(mf::gru_forward(std::span<const double>{}, zero_channel(2)), mf::ContractError);
}

TEST(Gru, GradientMatchesFiniteDifferences) {
  mf::SeededRng rng(2);
  const auto channel = mf::init_gru_channel(3, rng);
  std::vector<Matrix> params;
  channel.for_each([&](const char*, const Matrix& m) { params.push_back(m); });
  for (std::size_t k = 6; k < 9; ++k) params[k] = random_matrix(1, 3, rng, -0.5, 0.5);  // nonzero biases
  const std::vector<double> series{0.3, -1.2, 0.8, 2.0, -0.4};
  std::vector<Matrix> inputs, active;
  for (double x : series) inputs.push_back(Matrix{{x}}), active.push_back(Matrix{{1.0}});
  const auto build = [&](mf::ad::Tape&, const std::vector<mf::ad::Var>& v) {
    mf::GruChannel<mf::ad::Var> c{v[0], v[1], v[2], v[3], v[4], v[5], v[6], v[7], v[8]};
    return mf::ad::sum(mf::ad::gru_forward(c, inputs, active));
  };
  EXPECT_LE(mf::testing::gradient_check(params, build), 1e-6);
}

TEST(Gru, OrderSensitivity) {
  auto p = zero_channel(1);
  p.w_h = Matrix{{1.0}};
  p.u_h = Matrix{{1.0}};
  p.w_z = Matrix{{1.0}};
  const std::vector<double> fwd{0.0, 1.0, 2.0}, rev{2.0, 1.0, 0.0};
  EXPECT_NE(mf::gru_forward(fwd, p)(0, 0), mf::gru_forward(rev, p)(0, 0));
}

TEST(Embedding, ZeroWeightsGiveZeroMatrix) {
  mf::SeededRng rng(1);
  auto p = mf::init_embedding(4, 2, 3, 3, rng);
  p = p.transform([](const Matrix& m) { return Matrix(m.rows(), m.cols()); });
  const auto z = mf::embed_patient(random_record(5, 4, 2, rng), p);
  EXPECT_EQ(z, Matrix(5, 3));
}

TEST(Embedding, ShapeAndDeterminism) {
  mf::SeededRng rng(1);
  const auto p = mf::init_embedding(4, 2, 3, 3, rng);
  const auto rec = random_record(6, 4, 2, rng);
  const auto z = mf::embed_patient(rec, p);
  EXPECT_EQ(z.rows(), 5u);
  EXPECT_EQ(z.cols(), 3u);
  EXPECT_EQ(z, mf::embed_patient(rec, p));
}

TEST(Embedding, FeatureCountMismatchIsContractError) {
  mf::SeededRng rng(1);
  const auto p = mf::init_embedding(4, 2, 3, 3, rng);
  EXPECT_THROW(mf::embed_patient(random_record(5, 3, 2, rng), p), mf::ContractError);
}

TEST(Embedding, ChannelIsolationAndNonNegativity) {
  mf::SeededRng rng(8);
  const auto p = mf::init_embedding(5, 2, 6, 4, rng, false);
  auto rec = random_record(7, 5, 2, rng);
  const auto base = mf::embed_patient(rec, p);
  for (double v : base.data()) EXPECT_GE(v, 0.0);
  for (std::size_t j = 0; j < 5; ++j) {
    auto changed = rec;
    for (std::size_t t = 0; t < 7; ++t) changed.dynamic(t, j) += rng.uniform(0.5, 1.5);
    const auto z = mf::embed_patient(changed, p);
    for (std::size_t i = 0; i < 5; ++i)
      if (i != j) {
        for (std::size_t c = 0; c < 4; ++c) EXPECT_EQ(z(i, c), base(i, c));
      }
  }
}

TEST(Embedding, TiedInitializationSharesTheFirstDraw) {
  mf::SeededRng a(3), b(3);
  const auto tied = mf::init_embedding(3, 1, 4, 2, a, true);
  const auto free = mf::init_embedding(3, 1, 4, 2, b, false);
  EXPECT_EQ(tied.channels[0].u_z, tied.channels[2].u_z);
  EXPECT_EQ(tied.channels[0].w_h, free.channels[0].w_h);
  EXPECT_NE(free.channels[0].u_z, free.channels[1].u_z);
}

TEST(Embedding, BatchedRaggedPathMatchesPerPatientPath) {
  mf::SeededRng rng(4);
  const auto p = mf::init_embedding(3, 2, 4, 3, rng, false);
  std::vector<mf::PatientRecord> recs;
  for (std::size_t t : {2u, 5u, 3u, 1u}) recs.push_back(random_record(t, 3, 2, rng));
  std::vector<const mf::PatientRecord*> ptrs;
  for (const auto& r : recs) ptrs.push_back(&r);
  mf::ad::Tape tape;
  const auto bound = p.transform([&](const Matrix& m) { return tape.constant(m); });
  const auto nodes = mf::ad::embed_batch(bound, mf::make_sequence_batch(ptrs));
  for (std::size_t n = 0; n < recs.size(); ++n) {
    const auto z = mf::embed_patient(recs[n], p);
    for (std::size_t i = 0; i < 4; ++i)
      for (std::size_t c = 0; c < 3; ++c) EXPECT_NEAR(nodes[i].value()(n, c), z(i, c), 1e-12);
  }
}

// Correlation --------------------------------------------------------------------------

TEST(Kernel, Examples) {
  const std::vector<double> x{0, 0}, y{1, 1};
  EXPECT_EQ(mf::laplacian_kernel(x, x, 0.7), 1.0);
  EXPECT_NEAR(mf::laplacian_kernel(x, y, 2.0), 0.367879, 1e-6);
  EXPECT_THROW(mf::laplacian_kernel(x, y, 0.0), mf::ContractError);
  EXPECT_THROW(mf::laplacian_kernel(x, y, -1.0), mf::ContractError);
}

TEST(Kernel, SymmetricAndInUnitInterval) {
  mf::SeededRng rng(5);
  for (int i = 0; i < 100; ++i) {
    std::vector<double> a(4), b(4);
    for (auto& v : a) v = rng.normal();
    for (auto& v : b) v = rng.normal();
    const double k = mf::laplacian_kernel(a, b, 1.3);
    EXPECT_EQ(k, mf::laplacian_kernel(b, a, 1.3));
    EXPECT_GT(k, 0.0);
    EXPECT_LE(k, 1.0);
  }
}

TEST(Correlation, IdenticalEmbeddingsGiveOne) {
  std::vector<Matrix> z{Matrix{{1, 2}, {1, 2}}, Matrix{{0.5, 0}, {0.5, 0}}};
  const auto c = mf::estimate_correlations(z);
  EXPECT_EQ(c.r(0, 1), 1.0);
}

TEST(Correlation, HandArithmeticExample) {
  std::vector<Matrix> z{Matrix{{0}, {1}}, Matrix{{0}, {2}}};
  const auto c = mf::estimate_correlations(z, {1.0, 2048});
  EXPECT_NEAR(c.r(0, 1), (std::exp(-1.0) + std::exp(-2.0)) / 2.0, 1e-15);
  // Four-figure hand value.
  EXPECT_NEAR(c.r(0, 1), 0.2516, 5e-5);
}

TEST(Correlation, SymmetricUnitDiagonalPositive) {
  mf::SeededRng rng(6);
  std::vector<Matrix> z;
  for (int n = 0; n < 30; ++n) z.push_back(random_matrix(6, 4, rng, 0, 2));
  const auto c = mf::estimate_correlations(z);
  for (std::size_t i = 0; i < 6; ++i) {
    EXPECT_EQ(c.r(i, i), 1.0);
    for (std::size_t j = 0; j < 6; ++j) {
      EXPECT_EQ(c.r(i, j), c.r(j, i));
      EXPECT_GT(c.r(i, j), 0.0);
      EXPECT_LE(c.r(i, j), 1.0);
    }
  }
  EXPECT_GT(c.sigma, 0.0);
}

TEST(Correlation, EmptySampleIsContractError) {
  EXPECT_THROW(mf::estimate_correlations(std::vector<Matrix>{}), mf::ContractError);
}

TEST(Correlation, MedianBandwidth) {
  // Pairwise L1 distances: 1, 3, 2 -> median 2.
  std::vector<Matrix> z{Matrix{{0}, {1}, {3}}};
  EXPECT_EQ(mf::median_l1_bandwidth(z), 2.0);
  // Even count: distances 1,3,2 and 4,4,0 -> sorted 0,1,2,3,4,4 -> 2.5.
  z.push_back(Matrix{{0}, {4}, {4}});
  EXPECT_EQ(mf::median_l1_bandwidth(z), 2.5);
  // All identical rows: fall back to 1.
  EXPECT_EQ(mf::median_l1_bandwidth(std::vector<Matrix>{Matrix(3, 2)}), 1.0);
}

TEST(Correlation, SampleCap) {
  mf::SeededRng rng(1);
  EXPECT_EQ(mf::correlation_sample(5, 10, rng).size(), 5u);
  const auto s = mf::correlation_sample(100, 10, rng);
  EXPECT_EQ(s.size(), 10u);
  EXPECT_TRUE(std::is_sorted(s.begin(), s.end()));
  EXPECT_EQ(std::set<std::size_t>(s.begin(), s.end()).size(), 10u);
}

// Spectral clustering --------------------------------------------------------------------

TEST(Spectral, SingleCluster) {
  const auto c = mf::testing::block_affinity({2, 3}, 0.8, 0.2);
  EXPECT_EQ(mf::spectral_cluster(c, 1, 0), mf::ClusterAssignment::whole(5));
}

TEST(Spectral, ThreeBlocksRecoveredExactly) {
  const auto c = mf::testing::block_affinity({3, 3, 3}, 0.9, 0.1);
  const auto a = mf::spectral_cluster(c, 3, 0);
  EXPECT_EQ(a, mf::planted_blocks(9, 3));
  EXPECT_NEAR(mf::between_group_sum(c.r, a) / 2.0, mf::testing::exhaustive_min_between(c.r, 3), 1e-12);
}

TEST(Spectral, KEqualsFGivesSingletons) {
  const Matrix r{{1, 0.6, 0.2, 0.3}, {0.6, 1, 0.4, 0.1}, {0.2, 0.4, 1, 0.7}, {0.3, 0.1, 0.7, 1}};
  const auto a = mf::spectral_cluster({r, 1.0}, 4, 0);
  EXPECT_EQ(a.k(), 4u);
  for (const auto& g : a.groups()) EXPECT_EQ(g.size(), 1u);
}

TEST(Spectral, InvalidKIsContractError) {
  const auto c = mf::testing::block_affinity({2, 2}, 0.9, 0.1);
  EXPECT_THROW(mf::spectral_cluster(c, 5, 0), mf::ContractError);
  EXPECT_THROW(mf::spectral_cluster(c, 0, 0), mf::ContractError);
}

TEST(Spectral, DeterministicAndValid) {
  mf::SeededRng rng(12);
  for (int t = 0; t < 20; ++t) {
    const std::size_t f = 4 + rng.below(8);
    Matrix r(f, f, 1.0);
    for (std::size_t i = 0; i < f; ++i)
      for (std::size_t j = i + 1; j < f; ++j) r(i, j) = r(j, i) = rng.uniform(0.01, 1.0);
    const std::size_t k = 1 + rng.below(f);
    const auto a = mf::spectral_cluster({r, 1.0}, k, 99);
    a.validate(f);
    EXPECT_EQ(a.k(), k);
    EXPECT_EQ(a, mf::spectral_cluster({r, 1.0}, k, 99));
  }
}

TEST(KMeans, EmptyClustersAreRepaired) {
  // Four identical points and one far point, k=3: every cluster must be non-empty.
  Matrix pts{{0, 0}, {0, 0}, {0, 0}, {0, 0}, {5, 5}};
  mf::SeededRng rng(1);
  const auto res = mf::kmeans(pts, 3, rng);
  EXPECT_EQ(std::set<std::size_t>(res.labels.begin(), res.labels.end()).size(), 3u);
}

TEST(Partition, AdjustedRandIndex) {
  EXPECT_EQ(mf::adjusted_rand_index(std::vector<std::size_t>{0, 0, 1, 1}, {1, 1, 0, 0}), 1.0);
  EXPECT_EQ(mf::adjusted_rand_index(std::vector<std::size_t>{0, 0, 0}, {0, 0, 0}), 1.0);
  // Hand value: labels (0,0,1,1) vs (0,1,0,1) -> index 0, expected 1/3, max 2 -> ARI = -0.5.
  EXPECT_NEAR(mf::adjusted_rand_index(std::vector<std::size_t>{0, 0, 1, 1}, {0, 1, 0, 1}), -0.5, 1e-15);
}

TEST(Partition, CanonicalFormAndValidation) {
  const mf::ClusterAssignment a({{3, 1}, {0, 2}});
  EXPECT_EQ(a.groups(), (std::vector<std::vector<std::size_t>>{{0, 2}, {1, 3}}));
  EXPECT_TRUE(a.same_group(0, 2));
  EXPECT_FALSE(a.same_group(0, 1));
  EXPECT_THROW(mf::ClusterAssignment({{0, 1}, {1, 2}}).validate(3), mf::ContractError);
  EXPECT_THROW(mf::ClusterAssignment({{0}, {2}}).validate(3), mf::ContractError);
  EXPECT_THROW(mf::ClusterAssignment({{0, 1}, {}}).validate(2), mf::ContractError);
}

// Graph construction --------------------------------------------------------------------

TEST(Graph, ThreeFeatureExample) {
  const double r01 = 0.37;
  const Matrix r{{1, r01, 0.2}, {r01, 1, 0.5}, {0.2, 0.5, 1}};
  const auto g = mf::build_graph({r, 1.0}, mf::ClusterAssignment({{0, 1}, {2}}));
  EXPECT_EQ(g.adjacency, (Matrix{{1, r01, 0, 1}, {r01, 1, 0, 1}, {0, 0, 1, 1}, {1, 1, 1, 1}}));
  EXPECT_EQ(g.static_index(), 3u);
}

TEST(Graph, AblationMatrices) {
  const Matrix r{{1, 0.3, 0.2}, {0.3, 1, 0.5}, {0.2, 0.5, 1}};
  const mf::CorrelationMatrix c{r, 1.0};
  const auto split = mf::ClusterAssignment({{0, 1}, {2}});
  EXPECT_EQ(mf::graph_for(mf::Ablation::cor_minus, c, split).adjacency, Matrix(4, 4, 1.0));
  EXPECT_EQ(mf::graph_for(mf::Ablation::clu_minus, c, split).adjacency,
            (Matrix{{1, 0.3, 0.2, 1}, {0.3, 1, 0.5, 1}, {0.2, 0.5, 1, 1}, {1, 1, 1, 1}}));
}

TEST(Graph, NeighbourSetsAndPurity) {
  mf::SeededRng rng(3);
  Matrix r(7, 7, 1.0);
  for (std::size_t i = 0; i < 7; ++i)
    for (std::size_t j = i + 1; j < 7; ++j) r(i, j) = r(j, i) = rng.uniform(0.05, 0.95);
  const mf::ClusterAssignment a({{0, 4, 5}, {1, 2}, {3, 6}});
  const auto g = mf::build_graph({r, 1.0}, a);
  EXPECT_EQ(g, mf::build_graph({r, 1.0}, a));
  const Matrix& adj = g.adjacency;
  for (std::size_t i = 0; i < 8; ++i) {
    EXPECT_EQ(adj(i, i), 1.0);
    for (std::size_t j = 0; j < 8; ++j) {
      EXPECT_EQ(adj(i, j), adj(j, i));
      EXPECT_GE(adj(i, j), 0.0);
      EXPECT_LE(adj(i, j), 1.0);
      const bool neighbour = adj(i, j) != 0.0;
      const bool expected = i == j || i == 7 || j == 7 || a.same_group(i, j);
      EXPECT_EQ(neighbour, expected) << i << "," << j;
    }
  }
}

TEST(Ablation, ParseAndPrint) {
  for (auto a : {mf::Ablation::full, mf::Ablation::cor_minus, mf::Ablation::clu_minus})
    EXPECT_EQ(mf::parse_ablation(mf::to_string(a)), a);
  EXPECT_THROW(mf::parse_ablation("none"), mf::ValidationError);
}

// Interaction --------------------------------------------------------------------------

TEST(Gcn, IdentityGraphAndWeights) {
  mf::SeededRng rng(2);
  const Matrix z = random_matrix(4, 3, rng, 0, 1);
  EXPECT_EQ(mf::gcn_layer(z, Matrix::identity(4), Matrix::identity(3)), z);
}

TEST(Gcn, AllOnesExample) {
  EXPECT_EQ(mf::gcn_layer(Matrix::identity(3), Matrix(3, 3, 1.0), Matrix::identity(3)), Matrix(3, 3, 1.0));
}

TEST(Gcn, ShapeMismatchIsContractError) {
  EXPECT_THROW(mf::gcn_layer(Matrix(4, 3), Matrix::identity(3), Matrix::identity(3)), mf::ContractError);
  EXPECT_THROW(mf::gcn_layer(Matrix(3, 3), Matrix::identity(3), Matrix::identity(2)), mf::ContractError);
}

TEST(Gcn, WeightGradientMatchesFiniteDifferences) {
  mf::SeededRng rng(7);
  const Matrix z = random_matrix(4, 3, rng, 0, 1);
  Matrix a = random_matrix(4, 4, rng, 0, 1);
  a = (a + a.transpose()) * 0.5;
  const Matrix w = random_matrix(3, 3, rng);
  const Matrix weights = random_matrix(4, 3, rng);
  const auto build = [&](mf::ad::Tape& t, const std::vector<mf::ad::Var>& v) {
    return mf::ad::sum(mf::ad::mul(mf::ad::gcn_layer(t.constant(z), a, v[0]), t.constant(weights)));
  };
  EXPECT_LE(mf::testing::gradient_check({w}, build), 1e-6);
}

TEST(Gcn, ZeroInputGivesZeroOutput) {
  mf::SeededRng rng(1);
  const auto p = mf::init_gcn(3, rng);
  EXPECT_EQ(mf::interact(Matrix(4, 3), {Matrix(4, 4, 1.0)}, p), Matrix(4, 3));
}

TEST(Gcn, LocalityAndStaticRouting) {
  // F=4: groups {0,1} and {2,3}; node 4 is static. Positive weights keep ReLU active.
  const Matrix r(4, 4, 0.5);
  const auto g = mf::build_graph({r, 1.0}, mf::ClusterAssignment({{0, 1}, {2, 3}}));
  mf::SeededRng rng(9);
  const mf::GcnParams p{random_matrix(3, 3, rng, 0.1, 1.0), random_matrix(3, 3, rng, 0.1, 1.0)};
  const Matrix z = random_matrix(5, 3, rng, 0.1, 1.0);
  Matrix bumped = z;
  for (std::size_t c = 0; c < 3; ++c) bumped(2, c) += 0.5;
  const Matrix l1 = mf::gcn_layer(z, g.adjacency, p.w1), l1b = mf::gcn_layer(bumped, g.adjacency, p.w1);
  for (std::size_t c = 0; c < 3; ++c) {
    EXPECT_EQ(l1(0, c), l1b(0, c));
    EXPECT_EQ(l1(1, c), l1b(1, c));
    EXPECT_NE(l1(4, c), l1b(4, c));
  }
  const Matrix two = mf::interact(z, g, p), twob = mf::interact(bumped, g, p);
  for (std::size_t c = 0; c < 3; ++c) EXPECT_NE(two(0, c), twob(0, c));
  for (double v : two.data()) EXPECT_GE(v, 0.0);
}

TEST(Gcn, BatchedLayerMatchesPerPatientLayer) {
  mf::SeededRng rng(10);
  const std::size_t b = 3, n = 5, d = 2;
  Matrix a = random_matrix(n, n, rng, 0, 1);
  a(1, 3) = a(3, 1) = 0.0;
  const mf::GcnParams p{random_matrix(d, d, rng), random_matrix(d, d, rng)};
  std::vector<Matrix> blocks;
  for (std::size_t i = 0; i < n; ++i) blocks.push_back(random_matrix(b, d, rng, 0, 1));
  mf::ad::Tape tape;
  std::vector<mf::ad::Var> nodes;
  for (const auto& m : blocks) nodes.push_back(tape.constant(m));
  const auto out = mf::ad::interact(nodes, a, mf::Gcn<mf::ad::Var>{tape.constant(p.w1), tape.constant(p.w2)});
  for (std::size_t s = 0; s < b; ++s) {
    Matrix z(n, d);
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t c = 0; c < d; ++c) z(i, c) = blocks[i](s, c);
    const Matrix ref = mf::interact(z, {a}, p);
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t c = 0; c < d; ++c) EXPECT_NEAR(out[i].value()(s, c), ref(i, c), 1e-12);
  }
}

TEST(Gcn, SymmetricNormalization) {
  const Matrix a{{1, 1}, {1, 3}};
  const Matrix n = mf::symmetric_normalized(a);
  EXPECT_NEAR(n(0, 0), 0.5, 1e-15);
  EXPECT_NEAR(n(0, 1), 1.0 / std::sqrt(8.0), 1e-15);
  EXPECT_NEAR(n(1, 1), 0.75, 1e-15);
}

// Prediction -------------------------------------------------------------------------

TEST(Head, ZeroQueryGivesUniformAttention) {
  mf::SeededRng rng(4);
  auto head = mf::init_head(3, 3, rng);
  head.w_q = Matrix(3, 3);
  const auto out = mf::attend_predict(random_matrix(5, 3, rng, 0, 1), head);
  for (double a : out.attention) EXPECT_NEAR(a, 0.2, 1e-15);
}

TEST(Head, ZeroLogitGivesHalf) {
  mf::SeededRng rng(4);
  auto head = mf::init_head(3, 2, rng);
  head.w_pred = Matrix(2, 1);
  EXPECT_EQ(mf::attend_predict(random_matrix(4, 3, rng, 0, 1), head).probability, 0.5);
}

TEST(Head, HandWorkedExample) {
  const mf::HeadParams head{Matrix{{1}}, Matrix{{1}}, Matrix{{1}}, Matrix{{1}}};
  const auto out = mf::attend_predict(Matrix{{2}, {1}}, head);
  // Closed form: alpha_0 = sigmoid(tanh 2 - tanh 1), e = 2 alpha_0 + alpha_1 = 1 + alpha_0.
  const double a0 = 1.0 / (1.0 + std::exp(std::tanh(1.0) - std::tanh(2.0)));
  EXPECT_NEAR(out.attention[0], a0, 1e-15);
  EXPECT_NEAR(out.attention[1], 1.0 - a0, 1e-15);
  EXPECT_NEAR(out.representation[0], 1.0 + a0, 1e-15);
  EXPECT_NEAR(out.probability, 1.0 / (1.0 + std::exp(-(1.0 + a0))), 1e-15);
  // Four-figure hand values.
  EXPECT_NEAR(out.attention[0], 0.5504, 5e-5);
  EXPECT_NEAR(out.probability, 0.8250, 5e-5);
}

TEST(Head, AttentionIsOnTheSimplex) {
  mf::SeededRng rng(5);
  for (int t = 0; t < 50; ++t) {
    const auto head = mf::init_head(4, 3, rng);
    const auto out = mf::attend_predict(random_matrix(6, 4, rng, 0, 3), head);
    double s = 0.0;
    for (double a : out.attention) {
      EXPECT_GT(a, 0.0);
      s += a;
    }
    EXPECT_NEAR(s, 1.0, 1e-9);
  }
}

TEST(Head, ShapeMismatchIsContractError) {
  mf::SeededRng rng(5);
  const auto head = mf::init_head(4, 3, rng);
  EXPECT_THROW(mf::attend_predict(Matrix(5, 3), head), mf::ContractError);
}

TEST(Loss, Examples) {
  EXPECT_NEAR(mf::bce_loss(1.0, 1.0), 0.0, 1e-11);
  EXPECT_NEAR(mf::bce_loss(0.5, 1.0), std::log(2.0), 1e-15);
  EXPECT_NEAR(mf::bce_loss(0.5, 0.0), std::log(2.0), 1e-15);
  EXPECT_TRUE(std::isfinite(mf::bce_loss(0.0, 1.0)));
}

TEST(Loss, Monotone) {
  double prev1 = mf::bce_loss(0.01, 1), prev0 = mf::bce_loss(0.01, 0);
  for (double p = 0.02; p < 1.0; p += 0.01) {
    EXPECT_LT(mf::bce_loss(p, 1), prev1);
    EXPECT_GT(mf::bce_loss(p, 0), prev0);
    prev1 = mf::bce_loss(p, 1);
    prev0 = mf::bce_loss(p, 0);
  }
}

// Whole model -----------------------------------------------------------------------

TEST(Model, BatchedForwardMatchesPerPatientForward) {
  auto cohort = mf::testing::tiny_cohort(6, 4, 2, 2, 6, 3);
  const auto params = tiny_model(4, 2, 3, 3, 1);
  const auto a = mf::build_graph(mf::CorrelationMatrix{Matrix(4, 4, 0.6), 1.0},
                                 mf::ClusterAssignment({{0, 2}, {1, 3}}))
                     .adjacency;
  const auto probs = mf::predict(cohort, mf::all_indices(6), params, a, 4);
  for (std::size_t n = 0; n < 6; ++n) {
    const auto ref = mf::predict_patient(cohort.records[n], params, a);
    EXPECT_NEAR(probs[n], ref.probability, 1e-12);
  }
}

TEST(Model, ParameterNamesAreUniqueAndStable) {
  const auto params = tiny_model(3, 2, 2, 2, 0);
  std::vector<std::string> names;
  params.for_each([&](const std::string& n, const Matrix&) { names.push_back(n); });
  EXPECT_EQ(std::set<std::string>(names.begin(), names.end()).size(), names.size());
  EXPECT_EQ(names.front(), "gru0.w_z");
  EXPECT_EQ(names.back(), "head.w_pred");
  EXPECT_EQ(names.size(), 3u * 9u + 2u + 2u + 4u);
}

TEST(Model, EndToEndGradientOnTinyModel) {
  auto cohort = mf::testing::tiny_cohort(8, 4, 2, 5, 5, 11);
  const auto params = tiny_model(4, 2, 3, 3, 5);
  const auto a = mf::build_graph(mf::CorrelationMatrix{Matrix(4, 4, 0.7), 1.0},
                                 mf::ClusterAssignment({{0, 1}, {2, 3}}))
                     .adjacency;
  const auto recs = mf::record_pointers(cohort, mf::all_indices(8));
  const auto batch = mf::make_sequence_batch(recs);
  std::vector<Matrix> flat;
  params.for_each([&](const std::string&, const Matrix& m) { flat.push_back(m); });
  const auto build = [&](mf::ad::Tape&, const std::vector<mf::ad::Var>& v) {
    std::size_t k = 0;
    auto bound = params.transform([&](const Matrix&) { return v[k++]; });
    return mf::batch_loss(mf::forward_batch(bound, batch, a), recs);
  };
  EXPECT_LE(mf::testing::gradient_check(flat, build), 1e-4);
}
