#include "arcrec/adam.hpp"
#include "arcrec/kernels.hpp"
#include "arcrec/model.hpp"
#include "arcrec/tape.hpp"

#include "support.hpp"

#include <doctest.h>

#include <algorithm>
#include <cmath>

using namespace arcrec;
using testing::check_gradient;
using testing::random_matrix;

TEST_CASE("matrix basics") {
    const Matrix a = Matrix::row({1, 2});
    const Matrix b = Matrix::column({3, 4});
    CHECK(matmul(a, b).scalar_value() == 11.0);
    CHECK(a.transposed() == Matrix::column({1, 2}));
    CHECK_THROWS_AS(matmul(a, a), NumericError);
    CHECK_THROWS_AS(Matrix(2, 2, std::vector<double>{1, 2, 3}), NumericError);
    Matrix c(2, 2, 1.0);
    c += Matrix(2, 2, 2.0);
    CHECK(c(1, 1) == 3.0);
    CHECK(c.squared_norm() == 36.0);
}

TEST_CASE("tape values of basic primitives") {
    ad::Tape tape;
    const auto x = tape.leaf(Matrix::row({1, 2}));
    const auto y = tape.leaf(Matrix::row({3, 4}));
    CHECK(ad::dot(x, y).value().scalar_value() == 11.0);
    const auto s = ad::softmax(tape.constant(Matrix::row({0, 0})));
    CHECK(s.value()[0] == 0.5);
    CHECK(s.value()[1] == 0.5);
    CHECK(ad::sigmoid(tape.constant(Matrix::scalar(0))).value().scalar_value() == 0.5);
}

TEST_CASE("hand derivatives") {
    SUBCASE("x squared at 3") {
        ad::Tape tape;
        const auto x = tape.leaf(Matrix::scalar(3));
        tape.backward(ad::hadamard(x, x));
        CHECK(x.grad().scalar_value() == doctest::Approx(6.0).epsilon(1e-15));
    }
    SUBCASE("sigmoid at 0") {
        ad::Tape tape;
        const auto x = tape.leaf(Matrix::scalar(0));
        tape.backward(ad::sigmoid(x));
        CHECK(x.grad().scalar_value() == doctest::Approx(0.25).epsilon(1e-15));
    }
}

TEST_CASE("tape misuse is rejected") {
    ad::Tape tape;
    const auto x = tape.leaf(Matrix::scalar(2));
    const auto y = ad::hadamard(x, x);
    tape.backward(y);
    CHECK(tape.consumed());
    CHECK_THROWS(tape.backward(y));
    ad::Tape t2;
    CHECK_THROWS_AS(ad::log(t2.leaf(Matrix::scalar(-1))), NumericError);
    CHECK_THROWS_AS(ad::add(t2.leaf(Matrix(1, 2)), t2.leaf(Matrix(2, 1))), NumericError);
}

TEST_CASE("unused leaves get zero gradients") {
    ad::Tape tape;
    const auto x = tape.leaf(Matrix::row({1, 2}));
    const auto unused = tape.leaf(Matrix::row({5, 6}));
    tape.backward(ad::sum(x));
    CHECK(unused.grad() == Matrix(1, 2));
}

// Each primitive against central differences on 100 random inputs.
TEST_CASE("primitive gradients match central differences") {
    std::mt19937_64 rng(8);
    using Build = std::function<ad::Var(ad::Tape&, std::vector<ad::Var>&)>;
    struct Case {
        const char* name;
        std::vector<std::pair<std::size_t, std::size_t>> shapes;
        Build build;
    };
    const std::vector<Case> cases = {
        {"add/sub/scale", {{2, 3}, {2, 3}}, [](ad::Tape&, std::vector<ad::Var>& v) {
             return ad::sum(ad::hadamard(ad::add(v[0], ad::scale(v[1], 1.7)), ad::sub(v[0], v[1])));
         }},
        {"matmul", {{2, 3}, {3, 2}}, [](ad::Tape&, std::vector<ad::Var>& v) {
             const auto m = ad::matmul(v[0], v[1]);
             return ad::sum(ad::hadamard(m, m));
         }},
        {"div", {{1, 4}, {1, 4}}, [](ad::Tape& t, std::vector<ad::Var>& v) {
             const auto denom = ad::add(ad::hadamard(v[1], v[1]), t.constant(Matrix(1, 4, 1.0)));
             return ad::sum(ad::div(v[0], denom));
         }},
        {"transpose/reshape", {{2, 3}, {3, 2}}, [](ad::Tape&, std::vector<ad::Var>& v) {
             return ad::dot(ad::transpose(v[0]), ad::reshape(ad::hadamard(v[1], v[1]), 3, 2));
         }},
        {"broadcast/mean", {{1, 3}, {4, 3}}, [](ad::Tape&, std::vector<ad::Var>& v) {
             const auto d = ad::sub(v[1], ad::broadcast_rows(ad::mean_rows(v[1]), 4));
             return ad::dot(ad::hadamard(d, d), ad::broadcast_rows(v[0], 4));
         }},
        {"concat/gather", {{2, 2}, {3, 2}}, [](ad::Tape&, std::vector<ad::Var>& v) {
             const std::vector<ad::Var> rows{v[0], v[1]};
             const auto all = ad::concat_rows(rows);
             const std::size_t pick[] = {4, 0, 4, 2};
             const auto g = ad::gather_rows(all, pick);
             const std::vector<ad::Var> cols{g, g};
             const auto wide = ad::concat_cols(cols);
             return ad::sum(ad::hadamard(wide, ad::sigmoid(wide)));
         }},
        {"norm", {{2, 3}}, [](ad::Tape&, std::vector<ad::Var>& v) { return ad::norm(v[0]); }},
        {"softmax", {{1, 5}, {1, 5}}, [](ad::Tape&, std::vector<ad::Var>& v) {
             return ad::dot(ad::softmax(v[0]), v[1]);
         }},
        {"log/sigmoid", {{1, 4}}, [](ad::Tape&, std::vector<ad::Var>& v) {
             return ad::sum(ad::log(ad::sigmoid(v[0])));
         }},
        {"log_sigmoid", {{1, 4}}, [](ad::Tape&, std::vector<ad::Var>& v) {
             return ad::sum(ad::log_sigmoid(ad::scale(v[0], 3.0)));
         }},
    };
    for (const Case& c : cases) {
        CAPTURE(c.name);
        int bad = 0;
        for (int trial = 0; trial < 100; ++trial) {
            std::vector<Matrix> inputs;
            for (auto [r, k] : c.shapes) inputs.push_back(random_matrix(r, k, rng));
            bad += check_gradient(inputs, c.build);
        }
        CHECK(bad == 0);
    }
}

TEST_CASE("sparse product gradient uses the adjoint") {
    std::mt19937_64 rng(3);
    CsrMatrix m;
    m.n = 3;
    m.row_ptr = {0, 2, 3, 5};
    m.col = {0, 2, 1, 0, 1};
    m.val = {0.5, 2.0, -1.0, 1.5, 0.25};
    const SparseOperator op = SparseOperator::from(m);
    const Matrix w = random_matrix(3, 2, rng);
    for (int trial = 0; trial < 100; ++trial)
        CHECK(check_gradient({random_matrix(3, 2, rng)}, [&](ad::Tape& t, std::vector<ad::Var>& v) {
                  const auto y = ad::spmm(op, v[0]);
                  return ad::dot(ad::hadamard(y, y), t.constant(w));
              }) == 0);
}

TEST_CASE("log_sigmoid is finite for large arguments") {
    ad::Tape tape;
    const auto x = tape.leaf(Matrix::row({-800, 800}));
    const auto y = ad::log_sigmoid(x);
    CHECK(y.value()[0] == doctest::Approx(-800));
    CHECK(y.value()[1] == doctest::Approx(0.0));
    tape.backward(ad::sum(y));
    CHECK(x.grad()[0] == doctest::Approx(1.0));
    CHECK(x.grad()[1] == doctest::Approx(0.0));
}

TEST_CASE("adam first step moves by the learning rate against the gradient sign") {
    for (double g : {1e-6, -3.0, 250.0}) {
        Matrix p(1, 1, 1.0);
        const Matrix grad(1, 1, g);
        Adam adam;
        Matrix* ps[] = {&p};
        const Matrix* gs[] = {&grad};
        adam.step(ps, gs);
        const double sign = g > 0 ? 1.0 : -1.0;
        CHECK(p[0] - 1.0 == doctest::Approx(-0.003 * sign).epsilon(1e-2));
    }
}

TEST_CASE("adam with zero gradient leaves parameters unchanged") {
    Matrix p(2, 2, 0.7);
    const Matrix grad(2, 2, 0.0);
    Adam adam;
    Matrix* ps[] = {&p};
    const Matrix* gs[] = {&grad};
    for (int s = 0; s < 3; ++s) adam.step(ps, gs);
    for (double v : p.values()) CHECK(std::abs(v - 0.7) < 1e-9);
}

TEST_CASE("adam recurrence on a constant gradient") {
    const double g = 0.4, lr = 0.01, b1 = 0.9, b2 = 0.999, eps = 1e-8;
    Matrix p(1, 1, 0.0);
    const Matrix grad(1, 1, g);
    Adam adam(AdamOptions{lr, b1, b2, eps});
    Matrix* ps[] = {&p};
    const Matrix* gs[] = {&grad};
    double expected = 0.0, m = 0.0, v = 0.0, previous = 0.0;
    for (int t = 1; t <= 5; ++t) {
        adam.step(ps, gs);
        m = b1 * m + (1 - b1) * g;
        v = b2 * v + (1 - b2) * g * g;
        const double mhat = m / (1 - std::pow(b1, t)), vhat = v / (1 - std::pow(b2, t));
        expected -= lr * mhat / (std::sqrt(vhat) + eps);
        CHECK(p[0] == doctest::Approx(expected).epsilon(1e-12));
        CHECK(p[0] < previous);
        previous = p[0];
    }
    CHECK(adam.steps() == 5);
}

TEST_CASE("adam rejects shape changes") {
    Matrix p(1, 2);
    const Matrix g1(1, 2), g2(2, 1);
    Adam adam;
    Matrix* ps[] = {&p};
    const Matrix* a[] = {&g1};
    const Matrix* b[] = {&g2};
    adam.step(ps, a);
    CHECK_THROWS_AS(adam.step(ps, b), NumericError);
}

TEST_CASE("parallel kernels agree with serial references") {
    std::mt19937_64 rng(21);
    kernels::set_workers(3);
    SUBCASE("gemm") {
        const std::size_t m = 37, k = 11, n = 23;
        const Matrix a = random_matrix(m, k, rng), b = random_matrix(k, n, rng);
        Matrix cs(m, n, 1.0), cp(m, n, 1.0);
        kernels::gemm_accumulate_serial(m, k, n, a.data(), b.data(), cs.data());
        kernels::gemm_accumulate_parallel(m, k, n, a.data(), b.data(), cp.data());
        CHECK(cs == cp);
        Matrix naive(m, n, 1.0);
        for (std::size_t i = 0; i < m; ++i)
            for (std::size_t j = 0; j < n; ++j)
                for (std::size_t q = 0; q < k; ++q) naive(i, j) += a(i, q) * b(q, j);
        for (std::size_t e = 0; e < naive.size(); ++e) CHECK(cs[e] == doctest::Approx(naive[e]).epsilon(1e-12));
    }
    SUBCASE("spmm") {
        CsrMatrix s;
        s.n = 50;
        for (std::size_t i = 0; i < s.n; ++i) {
            for (std::uint32_t j = 0; j < s.n; j += 1 + static_cast<std::uint32_t>((i + j) % 7)) {
                s.col.push_back(j);
                s.val.push_back(0.1 * static_cast<double>(i + j));
            }
            s.row_ptr.push_back(s.col.size());
        }
        const Matrix x = random_matrix(50, 6, rng);
        Matrix ys(50, 6), yp(50, 6);
        kernels::spmm_serial(s, x.data(), 6, ys.data());
        kernels::spmm_parallel(s, x.data(), 6, yp.data());
        CHECK(ys == yp);
    }
    SUBCASE("pair mlp") {
        std::mt19937_64 net_rng(5);
        const PreferenceNet a = PreferenceNet::random(4, 5, net_rng), b = PreferenceNet::random(4, 5, net_rng);
        const Matrix table = random_matrix(20, 4, rng);
        const std::vector<std::size_t> targets{0, 3, 7, 19, 4}, refs{1, 2, 19};
        std::vector<double> as(15), bs(15), ap(15), bp(15);
        kernels::pair_mlp_serial(table.data(), 4, targets, refs, a.view(), b.view(), as.data(), bs.data());
        kernels::pair_mlp_parallel(table.data(), 4, targets, refs, a.view(), b.view(), ap.data(), bp.data());
        CHECK(as == ap);
        CHECK(bs == bp);
        std::vector<double> x(4);
        for (std::size_t d = 0; d < 4; ++d) x[d] = table(7, d) * table(19, d);
        CHECK(as[2 * 3 + 2] == doctest::Approx(a.forward(x)).epsilon(1e-14));
        CHECK(bs[2 * 3 + 2] == doctest::Approx(b.forward(x)).epsilon(1e-14));
    }
    kernels::set_workers(1);
}
