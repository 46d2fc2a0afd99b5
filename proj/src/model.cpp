#include "fibredist/model.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <sstream>

#include "json.hpp"

#include "fibredist/csv.hpp"

namespace fibredist {

using nlohmann::json;

namespace {

constexpr std::array<std::string_view, 7> kKindNames = {"LINEAR", "ELASTIC_NET", "TREE", "FOREST",
                                                        "SVR_RBF", "KNN", "MARS"};

// JSON numbers cannot hold NaN or infinities; those travel as strings.
json num(double v) {
    if (std::isfinite(v)) return v;
    if (std::isnan(v)) return "NaN";
    return v > 0 ? "Inf" : "-Inf";
}

double num_of(const json& j) {
    if (j.is_number()) return j.get<double>();
    const auto s = j.get<std::string>();
    if (s == "NaN") return std::numeric_limits<double>::quiet_NaN();
    if (s == "Inf") return std::numeric_limits<double>::infinity();
    if (s == "-Inf") return -std::numeric_limits<double>::infinity();
    throw Error(ErrorCode::invalid_argument, "not a number in model text: " + s);
}

json vec(const Vector& v) {
    json a = json::array();
    for (Eigen::Index i = 0; i < v.size(); ++i) a.push_back(num(v(i)));
    return a;
}

Vector vec_of(const json& j) {
    Vector v(static_cast<Eigen::Index>(j.size()));
    for (std::size_t i = 0; i < j.size(); ++i) v(static_cast<Eigen::Index>(i)) = num_of(j[i]);
    return v;
}

json mat(const Matrix& m) {
    json data = json::array();
    for (Eigen::Index i = 0; i < m.rows(); ++i) {
        for (Eigen::Index k = 0; k < m.cols(); ++k) data.push_back(num(m(i, k)));
    }
    return {{"rows", m.rows()}, {"cols", m.cols()}, {"data", data}};
}

Matrix mat_of(const json& j) {
    const auto r = j.at("rows").get<Eigen::Index>();
    const auto c = j.at("cols").get<Eigen::Index>();
    const auto& data = j.at("data");
    if (data.size() != static_cast<std::size_t>(r * c)) {
        throw Error(ErrorCode::invalid_argument, "matrix size mismatch in model text");
    }
    Matrix m(r, c);
    std::size_t t = 0;
    for (Eigen::Index i = 0; i < r; ++i) {
        for (Eigen::Index k = 0; k < c; ++k) m(i, k) = num_of(data[t++]);
    }
    return m;
}

json tree_json(const RegressionTree& tree) {
    json feature = json::array(), threshold = json::array(), left = json::array(), right = json::array(),
         value = json::array(), weight = json::array();
    for (const auto& node : tree.nodes) {
        feature.push_back(node.feature);
        threshold.push_back(num(node.threshold));
        left.push_back(node.left);
        right.push_back(node.right);
        value.push_back(num(node.value));
        weight.push_back(num(node.weight));
    }
    return {{"feature", feature}, {"threshold", threshold}, {"left", left}, {"right", right},
            {"value", value},     {"weight", weight},       {"importance", vec(tree.importance)}};
}

RegressionTree tree_of(const json& j) {
    RegressionTree tree;
    const auto& f = j.at("feature");
    tree.nodes.resize(f.size());
    for (std::size_t i = 0; i < f.size(); ++i) {
        auto& node = tree.nodes[i];
        node.feature = f[i].get<int>();
        node.threshold = num_of(j.at("threshold")[i]);
        node.left = j.at("left")[i].get<int>();
        node.right = j.at("right")[i].get<int>();
        node.value = num_of(j.at("value")[i]);
        node.weight = num_of(j.at("weight")[i]);
    }
    tree.importance = vec_of(j.at("importance"));
    return tree;
}

json params_json(const HyperParams& params) {
    json j = {{"kind", std::string(to_string(kind_of(params)))}};
    std::visit(
        [&](const auto& p) {
            using T = std::decay_t<decltype(p)>;
            if constexpr (std::is_same_v<T, ElasticNetParams>) {
                j["alpha"] = num(p.alpha);
                j["lambda"] = num(p.lambda);
                j["lambda_ratio"] = num(p.lambda_ratio);
            } else if constexpr (std::is_same_v<T, TreeParams>) {
                j["cp"] = num(p.cp);
            } else if constexpr (std::is_same_v<T, ForestParams>) {
                j["mtry"] = p.mtry;
                j["min_node_size"] = p.min_node_size;
                j["n_trees"] = p.n_trees;
            } else if constexpr (std::is_same_v<T, SvrParams>) {
                j["sigma"] = num(p.sigma);
                j["cost"] = num(p.cost);
                j["epsilon"] = num(p.epsilon);
            } else if constexpr (std::is_same_v<T, KnnParams>) {
                j["k"] = p.k;
            } else if constexpr (std::is_same_v<T, MarsParams>) {
                j["degree"] = p.degree;
                j["nprune"] = p.nprune;
            }
        },
        params);
    return j;
}

HyperParams params_of(const json& j) {
    switch (parse_model_kind(j.at("kind").get<std::string>())) {
        case ModelKind::linear: return LinearParams{};
        case ModelKind::elastic_net:
            return ElasticNetParams{num_of(j.at("alpha")), num_of(j.at("lambda")), num_of(j.at("lambda_ratio"))};
        case ModelKind::tree: return TreeParams{num_of(j.at("cp"))};
        case ModelKind::forest:
            return ForestParams{j.at("mtry").get<int>(), j.at("min_node_size").get<int>(),
                                j.at("n_trees").get<int>()};
        case ModelKind::svr_rbf:
            return SvrParams{num_of(j.at("sigma")), num_of(j.at("cost")), num_of(j.at("epsilon"))};
        case ModelKind::knn: return KnnParams{j.at("k").get<int>()};
        case ModelKind::mars: return MarsParams{j.at("degree").get<int>(), j.at("nprune").get<int>()};
    }
    throw Error(ErrorCode::internal, "unhandled model kind");
}

json recipe_json(const NormalizationRecipe& r) {
    return {{"all_features", r.all_features},   {"kept_features", r.kept_features},
            {"dropped_zero_variance", r.dropped_zero_variance},
            {"kept_columns", r.kept_columns}, {"mean", vec(r.mean)}, {"sd", vec(r.sd)}};
}

NormalizationRecipe recipe_of(const json& j) {
    NormalizationRecipe r;
    r.all_features = j.at("all_features").get<std::vector<std::string>>();
    r.kept_features = j.at("kept_features").get<std::vector<std::string>>();
    r.dropped_zero_variance = j.at("dropped_zero_variance").get<std::vector<std::string>>();
    r.kept_columns = j.at("kept_columns").get<std::vector<int>>();
    r.mean = vec_of(j.at("mean"));
    r.sd = vec_of(j.at("sd"));
    return r;
}

json state_json(const FittedState& state) {
    return std::visit(
        [](const auto& s) -> json {
            using T = std::decay_t<decltype(s)>;
            if constexpr (std::is_same_v<T, LinearFit>) {
                return {{"intercept", num(s.intercept)},
                        {"coef", vec(s.coef)},
                        {"std_error", vec(s.std_error)},
                        {"t_stat", vec(s.t_stat)},
                        {"intercept_std_error", num(s.intercept_std_error)},
                        {"residual_sd", num(s.residual_sd)},
                        {"rank_deficient", s.rank_deficient}};
            } else if constexpr (std::is_same_v<T, ElasticNetFit>) {
                return {{"intercept", num(s.intercept)}, {"coef", vec(s.coef)}, {"alpha", num(s.alpha)},
                        {"lambda", num(s.lambda)},       {"sweeps", s.sweeps}};
            } else if constexpr (std::is_same_v<T, RegressionTree>) {
                return tree_json(s);
            } else if constexpr (std::is_same_v<T, RandomForest>) {
                json trees = json::array();
                for (const auto& t : s.trees) trees.push_back(tree_json(t));
                return {{"trees", trees}, {"importance", vec(s.importance)}};
            } else if constexpr (std::is_same_v<T, SvrFit>) {
                return {{"support", mat(s.support)},       {"coef", vec(s.coef)},
                        {"bias", num(s.bias)},             {"sigma", num(s.sigma)},
                        {"y_center", num(s.y_center)},     {"y_scale", num(s.y_scale)},
                        {"iterations", s.iterations},      {"dual_objective", num(s.dual_objective)}};
            } else if constexpr (std::is_same_v<T, KnnModel>) {
                return {{"train_x", mat(s.train_x)}, {"train_y", vec(s.train_y)}, {"k", s.k}};
            } else {
                json terms = json::array();
                for (const auto& term : s.terms) {
                    json t = json::array();
                    for (const auto& f : term) t.push_back({f.var, num(f.knot), f.direction});
                    terms.push_back(t);
                }
                return {{"terms", terms}, {"coef", vec(s.coef)}, {"degree", s.degree},
                        {"gcv", num(s.gcv)}, {"rss", num(s.rss)}};
            }
        },
        state);
}

FittedState state_of(ModelKind kind, const json& j) {
    switch (kind) {
        case ModelKind::linear: {
            LinearFit s;
            s.intercept = num_of(j.at("intercept"));
            s.coef = vec_of(j.at("coef"));
            s.std_error = vec_of(j.at("std_error"));
            s.t_stat = vec_of(j.at("t_stat"));
            s.intercept_std_error = num_of(j.at("intercept_std_error"));
            s.residual_sd = num_of(j.at("residual_sd"));
            s.rank_deficient = j.at("rank_deficient").get<bool>();
            return s;
        }
        case ModelKind::elastic_net: {
            ElasticNetFit s;
            s.intercept = num_of(j.at("intercept"));
            s.coef = vec_of(j.at("coef"));
            s.alpha = num_of(j.at("alpha"));
            s.lambda = num_of(j.at("lambda"));
            s.sweeps = j.at("sweeps").get<int>();
            return s;
        }
        case ModelKind::tree: return tree_of(j);
        case ModelKind::forest: {
            RandomForest s;
            for (const auto& t : j.at("trees")) s.trees.push_back(tree_of(t));
            s.importance = vec_of(j.at("importance"));
            return s;
        }
        case ModelKind::svr_rbf: {
            SvrFit s;
            s.support = mat_of(j.at("support"));
            s.coef = vec_of(j.at("coef"));
            s.bias = num_of(j.at("bias"));
            s.sigma = num_of(j.at("sigma"));
            s.y_center = num_of(j.at("y_center"));
            s.y_scale = num_of(j.at("y_scale"));
            s.iterations = j.at("iterations").get<long>();
            s.dual_objective = num_of(j.at("dual_objective"));
            return s;
        }
        case ModelKind::knn: {
            KnnModel s;
            s.train_x = mat_of(j.at("train_x"));
            s.train_y = vec_of(j.at("train_y"));
            s.k = j.at("k").get<int>();
            return s;
        }
        case ModelKind::mars: {
            MarsModel s;
            for (const auto& t : j.at("terms")) {
                MarsTerm term;
                for (const auto& f : t) term.push_back({f[0].get<int>(), num_of(f[1]), f[2].get<int>()});
                s.terms.push_back(std::move(term));
            }
            s.coef = vec_of(j.at("coef"));
            s.degree = j.at("degree").get<int>();
            s.gcv = num_of(j.at("gcv"));
            s.rss = num_of(j.at("rss"));
            return s;
        }
    }
    throw Error(ErrorCode::internal, "unhandled model kind");
}

}  // namespace

std::string_view to_string(ModelKind kind) { return kKindNames[static_cast<std::size_t>(kind)]; }

ModelKind parse_model_kind(std::string_view name) {
    std::string up(name);
    for (char& c : up) c = static_cast<char>(std::toupper(static_cast<unsigned char>(c)));
    if (up == "SVR" || up == "SVM" || up == "SVMRADIAL") up = "SVR_RBF";
    if (up == "RF" || up == "RANGER") up = "FOREST";
    if (up == "GLMNET" || up == "ENET") up = "ELASTIC_NET";
    if (up == "LM") up = "LINEAR";
    if (up == "RPART" || up == "CART") up = "TREE";
    if (up == "EARTH") up = "MARS";
    for (std::size_t i = 0; i < kKindNames.size(); ++i) {
        if (kKindNames[i] == up) return static_cast<ModelKind>(i);
    }
    throw Error(ErrorCode::invalid_argument, "unknown model kind '" + std::string(name) +
                                                 "'; expected one of LINEAR, ELASTIC_NET, TREE, FOREST, "
                                                 "SVR_RBF, KNN, MARS");
}

ModelKind kind_of(const HyperParams& params) { return static_cast<ModelKind>(params.index()); }

std::string describe(const HyperParams& params) {
    auto f = [](double v) { return csv::format_double(v); };
    return std::visit(
        [&](const auto& p) -> std::string {
            using T = std::decay_t<decltype(p)>;
            if constexpr (std::is_same_v<T, LinearParams>) {
                return "none";
            } else if constexpr (std::is_same_v<T, ElasticNetParams>) {
                return "alpha=" + f(p.alpha) + "; lambda=" + f(p.lambda);
            } else if constexpr (std::is_same_v<T, TreeParams>) {
                return "cp=" + f(p.cp);
            } else if constexpr (std::is_same_v<T, ForestParams>) {
                return "mtry=" + std::to_string(p.mtry) + "; min_node_size=" + std::to_string(p.min_node_size) +
                       "; n_trees=" + std::to_string(p.n_trees);
            } else if constexpr (std::is_same_v<T, SvrParams>) {
                return "sigma=" + f(p.sigma) + "; C=" + f(p.cost) + "; epsilon=" + f(p.epsilon);
            } else if constexpr (std::is_same_v<T, KnnParams>) {
                return "k=" + std::to_string(p.k);
            } else {
                return "degree=" + std::to_string(p.degree) + "; nprune=" + std::to_string(p.nprune);
            }
        },
        params);
}

std::vector<HyperParams> default_grid(ModelKind kind, int p) {
    if (p < 1) throw Error(ErrorCode::invalid_argument, "grid needs at least one feature");
    std::vector<HyperParams> grid;
    switch (kind) {
        case ModelKind::linear: grid.push_back(LinearParams{}); break;
        case ModelKind::elastic_net:
            for (double alpha : {0.0, 0.25, 0.5, 0.75, 1.0}) {
                for (int k = 0; k < 25; ++k) {
                    grid.push_back(ElasticNetParams{alpha, 0.0, std::pow(10.0, -3.0 * k / 24.0)});
                }
            }
            break;
        case ModelKind::tree:
            for (int k = 0; k < 10; ++k) grid.push_back(TreeParams{std::pow(10.0, -4.0 + 3.0 * k / 9.0)});
            break;
        case ModelKind::forest:
            for (int mtry = 1; mtry <= p; ++mtry) {
                for (int node : {1, 5, 10}) grid.push_back(ForestParams{mtry, node, 500});
            }
            break;
        case ModelKind::svr_rbf:
            for (double c : {0.25, 0.5, 1.0, 2.0, 4.0}) grid.push_back(SvrParams{0.0, c, 0.1});
            break;
        case ModelKind::knn:
            for (int k : {3, 5, 7, 9, 11}) grid.push_back(KnnParams{k});
            break;
        case ModelKind::mars:
            for (int degree : {1, 2}) {
                for (int nprune : {5, 10, 15, 20, 25}) grid.push_back(MarsParams{degree, nprune});
            }
            break;
    }
    return grid;
}

HyperParams resolve_params(const HyperParams& params, const Matrix& z, const Vector& y, std::uint64_t seed) {
    HyperParams out = params;
    if (auto* en = std::get_if<ElasticNetParams>(&out); en && en->lambda <= 0) {
        en->lambda = en->lambda_ratio * elastic_net_lambda_max(z, y, en->alpha);
    } else if (auto* svr = std::get_if<SvrParams>(&out); svr && svr->sigma <= 0) {
        svr->sigma = estimate_sigma(z, seed);
    } else if (auto* forest = std::get_if<ForestParams>(&out)) {
        forest->mtry = std::clamp(forest->mtry, 1, static_cast<int>(std::max<Eigen::Index>(1, z.cols())));
    }
    return out;
}

Vector TrainedModel::predict_standardized(const Matrix& z, Backend backend) const {
    return std::visit(
        [&](const auto& s) -> Vector {
            using T = std::decay_t<decltype(s)>;
            if constexpr (std::is_same_v<T, RandomForest> || std::is_same_v<T, KnnModel>) {
                return s.predict(z, backend);
            } else {
                return s.predict(z);
            }
        },
        state);
}

Vector TrainedModel::predict(const Matrix& rows, Backend backend) const {
    return predict_standardized(apply_recipe(recipe, rows), backend);
}

Vector TrainedModel::predict(const Matrix& rows, const std::vector<std::string>& names, Backend backend) const {
    return predict_standardized(apply_recipe(recipe, rows, names), backend);
}

TrainedModel train_standardized(const NormalizationRecipe& recipe, const Matrix& z, const Vector& y,
                                const HyperParams& params, const TrainOptions& options) {
    if (z.rows() != y.size() || z.rows() == 0) {
        throw Error(ErrorCode::invalid_argument, "training needs matching non-empty rows and targets");
    }
    TrainedModel model;
    model.kind = kind_of(params);
    model.recipe = recipe;
    model.y_min = y.minCoeff();
    model.y_max = y.maxCoeff();
    model.params = resolve_params(params, z, y, derive_seed(options.seed, "model.resolve"));
    std::visit(
        [&](const auto& p) {
            using T = std::decay_t<decltype(p)>;
            if constexpr (std::is_same_v<T, LinearParams>) {
                model.state = fit_linear(z, y);
            } else if constexpr (std::is_same_v<T, ElasticNetParams>) {
                model.state = fit_elastic_net(z, y, p.alpha, p.lambda);
            } else if constexpr (std::is_same_v<T, TreeParams>) {
                TreeOptions o;
                o.cp = p.cp;
                model.state = fit_tree(z, y, o);
            } else if constexpr (std::is_same_v<T, ForestParams>) {
                ForestOptions o;
                o.mtry = p.mtry;
                o.min_node_size = p.min_node_size;
                o.n_trees = p.n_trees;
                o.seed = derive_seed(options.seed, "model.forest");
                o.backend = options.backend;
                model.state = fit_forest(z, y, o);
            } else if constexpr (std::is_same_v<T, SvrParams>) {
                SvrOptions o;
                o.sigma = p.sigma;
                o.cost = p.cost;
                o.epsilon = p.epsilon;
                model.state = fit_svr(z, y, o);
            } else if constexpr (std::is_same_v<T, KnnParams>) {
                model.state = fit_knn(z, y, p.k);
            } else {
                MarsOptions o;
                o.degree = p.degree;
                o.nprune = p.nprune;
                model.state = fit_mars(z, y, o);
            }
        },
        model.params);
    return model;
}

TrainedModel train_model(const Matrix& x, const Vector& y, const std::vector<std::string>& names,
                         const HyperParams& params, const TrainOptions& options) {
    const NormalizationRecipe recipe = fit_recipe(x, names);
    return train_standardized(recipe, apply_recipe(recipe, x), y, params, options);
}

std::string serialize_model(const TrainedModel& model) {
    const json j = {{"format", "fibredist.model"},
                    {"version", 1},
                    {"kind", std::string(to_string(model.kind))},
                    {"params", params_json(model.params)},
                    {"recipe", recipe_json(model.recipe)},
                    {"y_min", num(model.y_min)},
                    {"y_max", num(model.y_max)},
                    {"state", state_json(model.state)}};
    return j.dump();
}

TrainedModel deserialize_model(std::string_view text) {
    json j;
    try {
        j = json::parse(text);
    } catch (const json::exception& e) {
        throw Error(ErrorCode::invalid_argument, std::string("model text is not valid JSON: ") + e.what());
    }
    if (j.value("format", "") != "fibredist.model") {
        throw Error(ErrorCode::invalid_argument, "model text has an unknown format tag");
    }
    try {
        TrainedModel model;
        model.kind = parse_model_kind(j.at("kind").get<std::string>());
        model.params = params_of(j.at("params"));
        model.recipe = recipe_of(j.at("recipe"));
        model.y_min = num_of(j.at("y_min"));
        model.y_max = num_of(j.at("y_max"));
        model.state = state_of(model.kind, j.at("state"));
        return model;
    } catch (const json::exception& e) {
        throw Error(ErrorCode::invalid_argument, std::string("malformed model text: ") + e.what());
    }
}

}  // namespace fibredist
