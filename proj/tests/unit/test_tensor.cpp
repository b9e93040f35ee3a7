#include <doctest.h>

#include "suites.hpp"

using namespace dualgan;

TEST_CASE("shape helpers") {
  CHECK(shape_size({2, 3, 4}) == 24);
  CHECK(shape_size({}) == 1);
  CHECK(shape_string({2, 3}) == "[2,3]");
  Tensor t({2, 3}, 1.5f);
  CHECK(t.rank() == 2);
  CHECK(t.dim(-1) == 3);
  CHECK(t.size() == 6);
  CHECK(t.reshaped({3, 2}).shape() == Shape{3, 2});
  CHECK_THROWS_AS(t.reshaped({4, 2}), ShapeError);
  CHECK_THROWS_AS(Tensor({2, 2}, std::vector<float>{1, 2, 3}), ShapeError);
  CHECK_THROWS_AS(t.item(), ShapeError);
  CHECK(Tensor::scalar(4.0f).item() == 4.0f);
}

TEST_CASE("pack2x2 places quadrants top-left, top-right, bottom-left, bottom-right") {
  // Four 1x1 single-channel images with distinct values.
  Tensor a({1, 1, 1}, 1.0f), b({1, 1, 1}, 2.0f), c({1, 1, 1}, 3.0f), d({1, 1, 1}, 4.0f);
  const Tensor p = pack2x2(a, b, c, d);
  CHECK(p.shape() == Shape{2, 2, 1});
  CHECK(p.storage() == std::vector<float>{1, 2, 3, 4});

  // 2x2 quadrants with two channels, batched.
  Tensor q[4];
  for (int i = 0; i < 4; ++i) {
    q[i] = Tensor({1, 2, 2, 2});
    for (std::int64_t j = 0; j < q[i].size(); ++j) q[i][j] = static_cast<float>(100 * i + j);
  }
  const Tensor m = pack2x2(q[0], q[1], q[2], q[3]);
  CHECK(m.shape() == Shape{1, 4, 4, 2});
  auto at = [&](int y, int x, int ch) { return m[(y * 4 + x) * 2 + ch]; };
  CHECK(at(0, 0, 0) == 0.0f);
  CHECK(at(0, 2, 0) == 100.0f);
  CHECK(at(2, 0, 1) == 201.0f);
  CHECK(at(3, 3, 1) == 307.0f);
}

TEST_CASE("pack2x2 rejects mismatched quadrants") {
  Tensor a({2, 2, 3}), b({2, 3, 3});
  CHECK_THROWS_AS(pack2x2(a, a, a, b), ShapeError);
  CHECK_THROWS_AS(unpack2x2(Tensor({3, 4, 3})), ShapeError);
}

TEST_CASE("pack round trip is bit-exact over 1000 random quartets") {
  CHECK(testing::pack_roundtrip_failures(1000, 11) == 0);
}

TEST_CASE("slice_leading and stack") {
  Tensor t({3, 2}, std::vector<float>{1, 2, 3, 4, 5, 6});
  CHECK(slice_leading(t, 1, 3).storage() == std::vector<float>{3, 4, 5, 6});
  CHECK_THROWS_AS(slice_leading(t, 2, 4), ShapeError);
  std::vector<Tensor> parts{Tensor({2}, 1.0f), Tensor({2}, 2.0f)};
  const Tensor s = stack<float>(parts);
  CHECK(s.shape() == Shape{2, 2});
  CHECK(s.storage() == std::vector<float>{1, 1, 2, 2});
}

TEST_CASE("tensor_cast and all_finite") {
  Tensor64 d({2}, std::vector<double>{0.5, -1.25});
  CHECK(tensor_cast<float>(d).storage() == std::vector<float>{0.5f, -1.25f});
  Tensor f({2}, std::vector<float>{1.0f, std::numeric_limits<float>::quiet_NaN()});
  CHECK_FALSE(all_finite(f));
  CHECK(all_finite(Tensor({3}, 2.0f)));
}
