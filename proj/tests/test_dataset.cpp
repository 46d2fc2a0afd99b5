#include <sstream>

#include "doctest.h"
#include "fibredist/csv.hpp"
#include "fibredist/dataset.hpp"
#include "helpers.hpp"

using namespace fibredist;

TEST_CASE("parse_numeric handles units and separators") {
    CHECK(*parse_numeric("1,5") == 1.5);
    CHECK(*parse_numeric("12 kV") == 12.0);
    CHECK(*parse_numeric("1.234,5") == 1234.5);
    CHECK(*parse_numeric("1,234.5") == 1234.5);
    CHECK(*parse_numeric("1.234.567") == 1234567.0);
    CHECK(*parse_numeric("-3.5 cm") == -3.5);
    CHECK(*parse_numeric("2.5e3") == 2500.0);
    CHECK(*parse_numeric(".5") == 0.5);
    CHECK(*parse_numeric("~ 20 %") == 20.0);
    CHECK_FALSE(parse_numeric("N/A"));
    CHECK_FALSE(parse_numeric(""));
    CHECK_FALSE(parse_numeric("NaN"));
}

TEST_CASE("parse_numeric is idempotent on its rendered output") {
    Rng rng(7);
    for (int i = 0; i < 2000; ++i) {
        const double magnitude = std::pow(10.0, 12.0 * uniform01(rng) - 6.0);
        const double v = (uniform01(rng) < 0.5 ? -1 : 1) * magnitude;
        const auto once = parse_numeric(csv::format_double(v));
        REQUIRE(once);
        const auto twice = parse_numeric(csv::format_double(*once));
        REQUIRE(twice);
        CHECK(*once == *twice);
        CHECK(*once == v);
    }
}

TEST_CASE("load_dataset drops incomplete rows and counts reasons") {
    SUBCASE("missing voltage") {
        std::istringstream in(test::csv_header() +
                              test::csv_row("a", "PVA", "10", "21", "0", "15", "1", "15", "300") +
                              test::csv_row("a", "PVA", "11", "21", "0", "16", "1", "15", "310") +
                              test::csv_row("b", "PVA", "12", "21", "0", "17", "1", "15", "320") +
                              test::csv_row("b", "PVA", "12", "21", "0", "", "1", "15", "320"));
        const auto loaded = load_dataset(in);
        CHECK(loaded.records.size() == 3);
        CHECK(loaded.report.dropped_missing == 1);
        CHECK(loaded.report.missing_by_column.at("voltage") == 1);
        CHECK(loaded.report.rows_read == 4);
    }
    SUBCASE("header only") {
        std::istringstream in(test::csv_header());
        const auto loaded = load_dataset(in);
        CHECK(loaded.records.empty());
        CHECK(loaded.report.rows_read == 0);
        CHECK(loaded.report.dropped_missing == 0);
        CHECK(loaded.report.dropped_non_finite_target == 0);
    }
    SUBCASE("non-finite target") {
        std::istringstream in(test::csv_header() + test::csv_row("a", "PVA", "10", "21", "0", "15", "1", "15", "NaN"));
        const auto loaded = load_dataset(in);
        CHECK(loaded.records.empty());
        CHECK(loaded.report.dropped_non_finite_target == 1);
    }
    SUBCASE("missing required column is named") {
        std::istringstream in("doi,polymer,fibre_diameter\na,PVA,300\n");
        try {
            load_dataset(in);
            FAIL("expected missing_columns");
        } catch (const Error& e) {
            CHECK(e.code() == ErrorCode::missing_columns);
            CHECK(std::string(e.what()).find("voltage") != std::string::npos);
        }
    }
    SUBCASE("semicolon export with decimal commas and shuffled, mixed-case headers") {
        std::istringstream in(
            "Fibre_Diameter;POLYMER;doi;concentration;needle_diameter;rotation_speed;voltage;flow_rate;distance\n"
            "\"350,5\";PCL;x;\"12,5\";21;0;15;\"0,8\";15\n");
        const auto loaded = load_dataset(in);
        REQUIRE(loaded.records.size() == 1);
        CHECK(loaded.report.delimiter == ';');
        CHECK(loaded.records[0].fibre_diameter == 350.5);
        CHECK(loaded.records[0].concentration == 12.5);
        CHECK(loaded.records[0].flow_rate == 0.8);
    }
}

TEST_CASE("dataset CSV round trip preserves records and fingerprint") {
    const auto ds = generate_synthetic({});
    std::ostringstream out;
    write_dataset_csv(out, ds.records);
    std::istringstream in(out.str());
    const auto loaded = load_dataset(in);
    REQUIRE(loaded.records.size() == ds.records.size());
    CHECK(dataset_fingerprint(loaded.records) == dataset_fingerprint(ds.records));
}

TEST_CASE("polymer_subset filters and groups by study") {
    auto records = generate_synthetic({}).records;
    SyntheticConfig other;
    other.polymer = "PVA";
    other.n_studies = 3;
    other.rows_per_study = 4;
    const auto pva = generate_synthetic(other).records;
    records.insert(records.end(), pva.begin(), pva.end());

    const PolymerTable t = polymer_subset(records, "PVA");
    CHECK(t.rows() == 12);
    CHECK(t.n_studies() == 3);
    CHECK(t.cols() == 6);
    for (std::size_t r : t.source_rows) CHECK(records[r].polymer == "PVA");

    const PolymerTable syn = polymer_subset(records, "SYN");
    CHECK(syn.n_studies() == 30);

    CHECK_THROWS_AS_CODE(polymer_subset(records, "PAN"), ErrorCode::unknown_polymer);

    other.n_studies = 1;
    other.polymer = "ONE";
    const auto one = generate_synthetic(other).records;
    CHECK_THROWS_AS_CODE(polymer_subset(one, "ONE"), ErrorCode::insufficient_studies);
}

TEST_CASE("collector indicators only when more than one label") {
    auto records = generate_synthetic({}).records;
    const PolymerTable with = polymer_subset(records, "SYN", true);
    CHECK(with.cols() == 8);  // flat plate + rotating drum
    for (auto& r : records) r.collector_type = "flat plate";
    const PolymerTable single = polymer_subset(records, "SYN", true);
    CHECK(single.cols() == 6);
}

TEST_CASE("study ids come from trimmed lowercase doi") {
    CHECK(normalise_study_id("  10.1000/ABC ") == "10.1000/abc");
    auto records = generate_synthetic({}).records;
    records[0].doi = " " + records[1].doi;
    std::transform(records[0].doi.begin(), records[0].doi.end(), records[0].doi.begin(), ::toupper);
    const PolymerTable t = polymer_subset(records, "SYN");
    CHECK(t.study[0] == t.study[1]);
}

TEST_CASE("fit_recipe drops constant features and uses n-1 SD") {
    Matrix x(3, 2);
    x << 1, 5, 2, 5, 3, 5;
    const auto recipe = fit_recipe(x, {"a", "b"});
    CHECK(recipe.kept_features == std::vector<std::string>{"a"});
    CHECK(recipe.dropped_zero_variance == std::vector<std::string>{"b"});
    CHECK(recipe.mean(0) == 2.0);
    CHECK(recipe.sd(0) == 1.0);

    Matrix c = Matrix::Constant(4, 2, 3.0);
    CHECK_THROWS_AS_CODE(fit_recipe(c, {"a", "b"}), ErrorCode::degenerate_data);
}

TEST_CASE("apply_recipe standardises") {
    const PolymerTable t = polymer_subset(generate_synthetic({}).records, "SYN");
    const auto recipe = fit_recipe(t.features, t.feature_names);
    const Matrix z = apply_recipe(recipe, t.features);
    for (Eigen::Index j = 0; j < z.cols(); ++j) {
        const double mean = z.col(j).mean();
        const double sd = std::sqrt((z.col(j).array() - mean).square().sum() / static_cast<double>(z.rows() - 1));
        CHECK(std::abs(mean) < 1e-12);
        CHECK(std::abs(sd - 1.0) < 1e-12);
    }
    Matrix at_mean(1, t.features.cols()), two_sd(1, t.features.cols());
    for (std::size_t k = 0; k < recipe.kept_columns.size(); ++k) {
        at_mean(0, recipe.kept_columns[k]) = recipe.mean(static_cast<Eigen::Index>(k));
        two_sd(0, recipe.kept_columns[k]) = recipe.mean(static_cast<Eigen::Index>(k)) + 2 * recipe.sd(static_cast<Eigen::Index>(k));
    }
    CHECK(apply_recipe(recipe, at_mean).cwiseAbs().maxCoeff() == 0.0);
    CHECK((apply_recipe(recipe, two_sd).array() - 2.0).abs().maxCoeff() < 1e-12);

    Matrix partial = t.features.leftCols(3);
    std::vector<std::string> names(t.feature_names.begin(), t.feature_names.begin() + 3);
    CHECK_THROWS_AS_CODE(apply_recipe(recipe, partial, names), ErrorCode::missing_feature);
}

TEST_CASE("recipe ignores test rows and the target") {
    const PolymerTable t = polymer_subset(generate_synthetic({}).records, "SYN");
    const Matrix train = t.features.topRows(400);
    const auto recipe = fit_recipe(train, t.feature_names);
    Matrix mutated = t.features;
    mutated.bottomRows(200).setRandom();
    mutated.bottomRows(200) *= 1e6;
    CHECK(fit_recipe(mutated.topRows(400), t.feature_names) == recipe);
    // the target is not an input to fit_recipe, and its name never enters the recipe
    CHECK(std::find(recipe.all_features.begin(), recipe.all_features.end(), "fibre_diameter") ==
          recipe.all_features.end());
}

TEST_CASE("range_check is boundary inclusive") {
    RangeSummary range;
    for (auto f : kProcessFeatures) range.features.push_back({std::string(f), 0, 100});
    range.features[3] = {"voltage", 5, 30};
    range.features[4] = {"flow_rate", 0.1, 10};
    ProcessInputs in = ProcessInputs::from_values({10, 20, 0, 20, 1, 15});
    CHECK(range_check(in, range).empty());
    in.voltage = 30;
    CHECK(range_check(in, range).empty());
    in.flow_rate = 50;
    const auto v = range_check(in, range);
    REQUIRE(v.size() == 1);
    CHECK(v[0].feature == "flow_rate");
    CHECK(v[0].min == 0.1);
    CHECK(v[0].max == 10);
    CHECK(v[0].value == 50);
}

TEST_CASE("range_check accepts every observed row") {
    const auto records = generate_synthetic({}).records;
    const RangeSummary range = range_of(records, "SYN");
    for (const auto& r : records) {
        CHECK(range_check(ProcessInputs::from_values(r.process()), range).empty());
    }
}

TEST_CASE("synthetic generator") {
    SyntheticConfig config;
    const auto a = generate_synthetic(config);
    const auto b = generate_synthetic(config);
    CHECK(a.records.size() == 600);
    std::ostringstream sa, sb;
    write_dataset_csv(sa, a.records);
    write_dataset_csv(sb, b.records);
    CHECK(sa.str() == sb.str());

    config.noise_sd = 0;
    config.study_offset_sd = 0;
    const auto clean = generate_synthetic(config);
    for (std::size_t i = 0; i < clean.records.size(); ++i) {
        CHECK(clean.records[i].fibre_diameter == std::max(1.0, synthetic_ground_truth(clean.records[i].process())));
        CHECK(clean.ground_truth[i] == synthetic_ground_truth(clean.records[i].process()));
    }
    config.n_studies = 0;
    CHECK_THROWS_AS_CODE(generate_synthetic(config), ErrorCode::invalid_argument);
}
