#include <cmath>

#include "doctest.h"

#include "bira/metrics.hpp"
#include "bira/rng.hpp"

using namespace bira;

namespace {

// Independent brute-force twin, written from the definitions: per-class
// precision/recall from explicit TP/FP/FN tallies over reconstructed
// (truth, predicted) pairs rather than matrix sums.
struct BruteMetrics {
    double aca, macro_f1, micro_f1;
};

BruteMetrics brute_force(const ConfusionMatrix& cm) {
    const int c = cm.num_classes;
    std::vector<std::pair<int, int>> pairs;
    for (int i = 0; i < c; ++i)
        for (int j = 0; j < c; ++j)
            for (long k = 0; k < cm.at(i, j); ++k) pairs.emplace_back(i, j);

    BruteMetrics out{0, 0, 0};
    int rows_used = 0;
    double diag = 0;
    long correct = 0;
    for (int cls = 0; cls < c; ++cls) {
        long tp = 0, fp = 0, fn = 0, support = 0;
        for (const auto& [truth, pred] : pairs) {
            if (truth == cls && pred == cls) ++tp;
            if (truth != cls && pred == cls) ++fp;
            if (truth == cls && pred != cls) ++fn;
            if (truth == cls) ++support;
        }
        if (support > 0) {
            diag += static_cast<double>(tp) / support;
            ++rows_used;
        }
        double prec = tp + fp > 0 ? static_cast<double>(tp) / (tp + fp) : 0.0;
        double rec = tp + fn > 0 ? static_cast<double>(tp) / (tp + fn) : 0.0;
        out.macro_f1 += prec + rec > 0 ? 2 * prec * rec / (prec + rec) : 0.0;
    }
    out.macro_f1 /= c;
    out.aca = rows_used > 0 ? diag / rows_used : 0.0;
    for (const auto& [truth, pred] : pairs)
        if (truth == pred) ++correct;
    out.micro_f1 = static_cast<double>(correct) / static_cast<double>(pairs.size());
    return out;
}

ConfusionMatrix from_rows(const std::vector<std::vector<long>>& rows) {
    ConfusionMatrix cm(static_cast<int>(rows.size()));
    for (std::size_t i = 0; i < rows.size(); ++i)
        for (std::size_t j = 0; j < rows.size(); ++j)
            for (long k = 0; k < rows[i][j]; ++k)
                cm.update(static_cast<int>(i), static_cast<int>(j));
    return cm;
}

}  // namespace

TEST_CASE("update: counting, range errors, order independence, merge") {
    ConfusionMatrix cm(3);
    cm.update(0, 0);
    CHECK(cm.at(0, 0) == 1);
    CHECK(cm.total() == 1);
    CHECK_THROWS_AS(cm.update(3, 0), DomainError);
    CHECK_THROWS_AS(cm.update(0, -1), DomainError);

    ConfusionMatrix a(2), b(2);
    a.update(0, 1);
    a.update(1, 1);
    b.update(1, 1);
    b.update(0, 1);
    CHECK(a == b);  // permutation of updates gives the same matrix

    ConfusionMatrix merged(2);
    merged.merge(a).merge(b);
    CHECK(merged.at(0, 1) == 2);
    CHECK(merged.at(1, 1) == 2);
}

TEST_CASE("aca: perfect, hand case, row-scaling invariance, empty-row handling") {
    ConfusionMatrix diag = from_rows({{4, 0}, {0, 9}});
    CHECK(aca(diag) == doctest::Approx(1.0));

    ConfusionMatrix cm = from_rows({{8, 2}, {4, 6}});
    CHECK(aca(cm) == doctest::Approx(0.7).epsilon(1e-12));

    // scaling one row's counts by an integer factor leaves ACA unchanged
    ConfusionMatrix scaled = from_rows({{24, 6}, {4, 6}});
    CHECK(aca(scaled) == doctest::Approx(aca(cm)).epsilon(1e-12));

    ConfusionMatrix empty_row = from_rows({{5, 0}, {0, 0}});
    MetricsResult m = compute_metrics(empty_row);
    CHECK(m.empty_truth_rows == std::vector<int>{1});
    CHECK(m.aca == doctest::Approx(1.0));  // class 1 excluded
    CHECK_THROWS_AS(compute_metrics(empty_row, /*strict=*/true), DomainError);
}

TEST_CASE("macro_f1: hand case and label-permutation invariance") {
    ConfusionMatrix cm = from_rows({{8, 2}, {4, 6}});
    const double f1_0 = 2.0 * (8.0 / 12.0) * (8.0 / 10.0) / ((8.0 / 12.0) + (8.0 / 10.0));
    const double f1_1 = 2.0 * (6.0 / 8.0) * (6.0 / 10.0) / ((6.0 / 8.0) + (6.0 / 10.0));
    MetricsResult m = compute_metrics(cm);
    CHECK(m.per_class_f1[0] == doctest::Approx(f1_0).epsilon(1e-12));
    CHECK(m.per_class_f1[1] == doctest::Approx(f1_1).epsilon(1e-12));
    CHECK(m.macro_f1 == doctest::Approx((f1_0 + f1_1) / 2).epsilon(1e-12));
    CHECK(m.macro_f1 == doctest::Approx(0.69697).epsilon(1e-4));

    // permuting class labels permutes per-class F1 but leaves macro unchanged
    ConfusionMatrix perm = from_rows({{6, 4}, {2, 8}});
    MetricsResult mp = compute_metrics(perm);
    CHECK(mp.per_class_f1[0] == doctest::Approx(f1_1).epsilon(1e-12));
    CHECK(mp.per_class_f1[1] == doctest::Approx(f1_0).epsilon(1e-12));
    CHECK(mp.macro_f1 == doctest::Approx(m.macro_f1).epsilon(1e-12));
}

TEST_CASE("micro_f1: hand case and trace/total identity") {
    ConfusionMatrix cm = from_rows({{8, 2}, {4, 6}});
    CHECK(micro_f1(cm) == doctest::Approx(0.7).epsilon(1e-12));

    Rng rng(71);
    for (int rep = 0; rep < 100; ++rep) {
        const int c = 2 + static_cast<int>(rng.uniform_int(5));
        ConfusionMatrix r(c);
        for (int i = 0; i < c; ++i)
            for (int j = 0; j < c; ++j)
                for (long k = rng.uniform_int(5); k > 0; --k) r.update(i, j);
        if (r.total() == 0) r.update(0, 0);
        CHECK(micro_f1(r) ==
              doctest::Approx(static_cast<double>(r.trace()) / r.total()).epsilon(1e-15));
    }
}

TEST_CASE("oracle equivalence on 1000 random matrices") {
    Rng rng(73);
    for (int rep = 0; rep < 1000; ++rep) {
        const int c = 2 + static_cast<int>(rng.uniform_int(5));
        ConfusionMatrix cm(c);
        for (int i = 0; i < c; ++i)
            for (int j = 0; j < c; ++j)
                for (long k = rng.uniform_int(6); k > 0; --k) cm.update(i, j);
        if (cm.total() == 0) cm.update(static_cast<int>(rng.uniform_int(c)), 0);
        MetricsResult m = compute_metrics(cm);
        BruteMetrics b = brute_force(cm);
        CHECK(std::abs(m.aca - b.aca) < 1e-12);
        CHECK(std::abs(m.macro_f1 - b.macro_f1) < 1e-12);
        CHECK(std::abs(m.micro_f1 - b.micro_f1) < 1e-12);
        CHECK(m.aca >= 0.0);
        CHECK(m.aca <= 1.0);
        CHECK(m.macro_f1 >= 0.0);
        CHECK(m.macro_f1 <= 1.0);
    }
}

TEST_CASE("all metrics are 1 iff the matrix is diagonal with nonzero diagonal") {
    ConfusionMatrix good = from_rows({{3, 0, 0}, {0, 7, 0}, {0, 0, 2}});
    MetricsResult m = compute_metrics(good);
    CHECK(m.aca == 1.0);
    CHECK(m.macro_f1 == 1.0);
    CHECK(m.micro_f1 == 1.0);

    ConfusionMatrix off = from_rows({{3, 1, 0}, {0, 7, 0}, {0, 0, 2}});
    MetricsResult m2 = compute_metrics(off);
    CHECK(m2.aca < 1.0);
    CHECK(m2.macro_f1 < 1.0);
    CHECK(m2.micro_f1 < 1.0);
}

TEST_CASE("smooth_window3: edges shrink, interior averages") {
    std::vector<double> xs = {4, 2, 6, 0};
    std::vector<double> sm = smooth_window3(xs);
    CHECK(sm[0] == doctest::Approx(3.0));
    CHECK(sm[1] == doctest::Approx(4.0));
    CHECK(sm[2] == doctest::Approx(8.0 / 3.0));
    CHECK(sm[3] == doctest::Approx(3.0));
}
