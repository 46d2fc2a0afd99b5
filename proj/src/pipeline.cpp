#include "fibredist/pipeline.hpp"

#include <chrono>
#include <cstdlib>
#include <ctime>

#include "fibredist/hash.hpp"
#include "json.hpp"

namespace fibredist {

using nlohmann::ordered_json;

void RunRequest::validate() const {
    if (polymer.empty()) throw Error(ErrorCode::invalid_argument, "polymer is required");
    inputs.validate();
    if (bootstrap_draws < 1 || bootstrap_draws > 100000) {
        throw Error(ErrorCode::invalid_argument, "bootstrap_draws must lie in [1, 100000]");
    }
    if (shap_sims < 1 || shap_sims > 10000) {
        throw Error(ErrorCode::invalid_argument, "shap_sims must lie in [1, 10000]");
    }
}

std::string request_json(const RunRequest& r) {
    ordered_json inputs;
    const auto values = r.inputs.values();
    for (std::size_t i = 0; i < kProcessFeatures.size(); ++i) inputs[std::string(kProcessFeatures[i])] = values[i];
    inputs["collector_type"] = r.inputs.collector_type;
    ordered_json j;
    j["polymer"] = r.polymer;
    j["model"] = std::string(to_string(r.model));
    j["seed"] = r.seed;
    j["include_collector"] = r.include_collector;
    j["bootstrap_draws"] = r.bootstrap_draws;
    j["shap_sims"] = r.shap_sims;
    j["inputs"] = inputs;
    return j.dump();
}

namespace {

double number_field(const ordered_json& obj, const std::string& name) {
    if (!obj.contains(name) || obj.at(name).is_null()) {
        throw Error(ErrorCode::invalid_argument, "missing numeric field: " + name);
    }
    const auto& v = obj.at(name);
    if (v.is_number()) return v.get<double>();
    if (v.is_string()) {
        if (auto parsed = parse_numeric(v.get<std::string>())) return *parsed;
    }
    throw Error(ErrorCode::invalid_argument, "field is not a number: " + name);
}

template <typename T>
T optional_field(const ordered_json& obj, const std::string& name, T fallback) {
    if (!obj.contains(name) || obj.at(name).is_null()) return fallback;
    try {
        return obj.at(name).get<T>();
    } catch (const std::exception&) {
        throw Error(ErrorCode::invalid_argument, "field has the wrong type: " + name);
    }
}

}  // namespace

RunRequest parse_run_request(std::string_view text) {
    ordered_json j;
    try {
        j = ordered_json::parse(text);
    } catch (const std::exception& e) {
        throw Error(ErrorCode::invalid_argument, std::string("request is not valid JSON: ") + e.what());
    }
    if (!j.is_object()) throw Error(ErrorCode::invalid_argument, "request must be a JSON object");
    RunRequest r;
    r.polymer = optional_field<std::string>(j, "polymer", "");
    if (!j.contains("model")) throw Error(ErrorCode::invalid_argument, "missing field: model");
    r.model = parse_model_kind(optional_field<std::string>(j, "model", ""));
    r.seed = optional_field<std::uint64_t>(j, "seed", kDefaultSeed);
    r.include_collector = optional_field<bool>(j, "include_collector", false);
    r.bootstrap_draws = optional_field<int>(j, "bootstrap_draws", 100);
    r.shap_sims = optional_field<int>(j, "shap_sims", 50);
    const ordered_json& in = j.contains("inputs") ? j.at("inputs") : j;
    if (!in.is_object()) throw Error(ErrorCode::invalid_argument, "inputs must be a JSON object");
    std::array<double, 6> values{};
    for (std::size_t i = 0; i < kProcessFeatures.size(); ++i) values[i] = number_field(in, std::string(kProcessFeatures[i]));
    r.inputs = ProcessInputs::from_values(values, optional_field<std::string>(in, "collector_type", ""));
    return r;
}

std::string make_run_id(const RunRequest& request, const std::string& fingerprint) {
    return sha256_hex(request_json(request) + "\n" + fingerprint).substr(0, 16);
}

std::string timestamp_now() {
    std::time_t t;
    if (const char* epoch = std::getenv("SOURCE_DATE_EPOCH"); epoch && *epoch) {
        t = static_cast<std::time_t>(std::strtoll(epoch, nullptr, 10));
    } else {
        t = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
    }
    std::tm tm{};
    gmtime_r(&t, &tm);
    char buf[32];
    std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
    return buf;
}

namespace {

template <typename Fn>
auto stage(const PipelineOptions& options, std::string_view name, Fn&& fn) {
    if (options.on_stage) options.on_stage(name);
    try {
        return fn();
    } catch (const Error& e) {
        throw Error(e.code(), std::string(name) + ": " + e.what());
    } catch (const std::exception& e) {
        throw Error(ErrorCode::internal, std::string(name) + ": " + e.what());
    }
}

std::vector<CoefficientRow> coefficient_rows(const TrainedModel& model, std::string& note) {
    std::vector<CoefficientRow> rows;
    const auto& names = model.features();
    if (const auto* fit = std::get_if<LinearFit>(&model.state)) {
        rows.push_back({"(Intercept)", fit->intercept, fit->intercept_std_error,
                        fit->intercept / fit->intercept_std_error});
        for (std::size_t j = 0; j < names.size(); ++j) {
            const auto c = static_cast<Eigen::Index>(j);
            rows.push_back({names[j], fit->coef(c), fit->std_error(c), fit->t_stat(c)});
        }
        note = "slopes per standard deviation of each predictor";
        if (fit->rank_deficient) note += "; rank deficient, minimum-norm solution";
    } else if (const auto* en = std::get_if<ElasticNetFit>(&model.state)) {
        rows.push_back({"(Intercept)", en->intercept, std::nullopt, std::nullopt});
        for (std::size_t j = 0; j < names.size(); ++j) {
            rows.push_back({names[j], en->coef(static_cast<Eigen::Index>(j)), std::nullopt, std::nullopt});
        }
        note = "penalised slopes per standard deviation of each predictor";
    } else {
        note = "no transparent coefficients for " + std::string(to_string(model.kind));
    }
    return rows;
}

}  // namespace

RunArtifacts run_pipeline(const std::vector<StudyRecord>& records, const std::string& fingerprint,
                          const RunRequest& request, const PipelineOptions& options) {
    request.validate();
    RunArtifacts a;
    a.request = request;
    a.dataset_fingerprint = fingerprint;
    a.run_id = make_run_id(request, fingerprint);
    a.created_at = options.created_at.empty() ? timestamp_now() : options.created_at;

    const PolymerTable table = stage(options, "subset", [&] {
        return polymer_subset(records, request.polymer, request.include_collector);
    });
    a.feature_names = table.feature_names;
    a.study_labels = table.study_labels;
    a.study_of_row = table.study;
    a.observed = table.target;

    CVOptions cv_options;
    cv_options.seed = request.seed;
    cv_options.backend = options.backend;
    a.cv = stage(options, "nested_cv", [&] { return nested_cv(table, request.model, cv_options); });
    a.warnings = a.cv.warnings;

    const FinalFit final = stage(options, "final_fit", [&] { return final_fit(table, request.model, cv_options); });
    const TrainedModel& model = final.model;
    a.selected_params = describe(model.params);
    for (const auto& name : model.recipe.dropped_zero_variance) {
        a.warnings.push_back("zero-variance feature dropped: " + name);
    }

    a.prediction = stage(options, "predict", [&] {
        Matrix row = feature_row(table, request.inputs).transpose();
        return model.predict(row, options.backend)(0);
    });

    a.distribution = stage(options, "residual_bootstrap", [&] {
        const Vector res = a.cv.residuals(table.target);
        return residual_bootstrap(a.prediction, std::vector<double>(res.data(), res.data() + res.size()),
                                  request.bootstrap_draws, derive_seed(request.seed, "pipeline.bootstrap"));
    });

    a.coefficients = coefficient_rows(model, a.coefficient_note);

    a.importance = stage(options, "importance", [&] {
        ImportanceOptions io;
        io.seed = derive_seed(request.seed, "pipeline.importance");
        io.backend = options.backend;
        return variable_importance(model, table, io);
    });

    stage(options, "shap", [&] {
        ShapOptions so;
        so.sims = request.shap_sims;
        so.seed = derive_seed(request.seed, "pipeline.shap");
        so.backend = options.backend;
        a.shap_rows = sample_rows(table.rows(), so.max_instances, so.seed, "shap.instances");
        Matrix instances(static_cast<Eigen::Index>(a.shap_rows.size()), table.features.cols());
        for (std::size_t i = 0; i < a.shap_rows.size(); ++i) {
            instances.row(static_cast<Eigen::Index>(i)) = table.features.row(a.shap_rows[i]);
        }
        a.shap = shap_values(model, instances, table.features, so);
        const auto& kept = model.recipe.kept_columns;
        a.shap_feature_values.resize(instances.rows(), static_cast<Eigen::Index>(kept.size()));
        for (std::size_t j = 0; j < kept.size(); ++j) {
            a.shap_feature_values.col(static_cast<Eigen::Index>(j)) = instances.col(kept[j]);
        }
        return 0;
    });

    a.correlations = stage(options, "correlations", [&] { return correlation_matrix(table); });

    a.recommendation = stage(options, "recommendation", [&] {
        std::vector<StudyRecord> rows;
        rows.reserve(table.rows());
        for (std::size_t r : table.source_rows) rows.push_back(records[r]);
        return recommend_solvents(rows, request.inputs, a.prediction);
    });

    stage(options, "range_check", [&] {
        a.range = range_of(table);
        a.violations = range_check(request.inputs, a.range);
        return 0;
    });
    return a;
}

Capabilities list_capabilities(const std::vector<StudyRecord>& records) {
    Capabilities caps;
    caps.polymers = list_polymers(records);
    for (ModelKind kind : kAllModelKinds) caps.models.push_back({kind, true});
    caps.dataset_fingerprint = dataset_fingerprint(records);
    caps.rows = records.size();
    return caps;
}

std::string capabilities_json(const Capabilities& caps) {
    ordered_json models = ordered_json::array();
    std::string available;
    for (const auto& m : caps.models) {
        models.push_back({{"kind", std::string(to_string(m.kind))}, {"available", m.available}});
        if (m.available) available += (available.empty() ? "" : ", ") + std::string(to_string(m.kind));
    }
    ordered_json j;
    j["polymers"] = caps.polymers;
    j["models"] = models;
    j["models_label"] = "Available models on this server: " + available;
    j["dataset_fingerprint"] = caps.dataset_fingerprint;
    j["rows"] = caps.rows;
    j["version"] = std::string(kVersion);
    return j.dump();
}

std::string_view to_string(RunState state) {
    switch (state) {
        case RunState::queued: return "QUEUED";
        case RunState::processing: return "PROCESSING";
        case RunState::done: return "DONE";
        case RunState::failed: return "FAILED";
    }
    return "FAILED";
}

std::string status_json(const RunStatus& s) {
    ordered_json j;
    j["run_id"] = s.run_id;
    j["state"] = std::string(to_string(s.state));
    j["message"] = s.message;
    j["stage"] = s.stage;
    if (!s.error_code.empty()) j["error_code"] = s.error_code;
    return j.dump();
}

RunService::RunService(std::vector<StudyRecord> records, int workers, PipelineOptions options)
    : options_(std::move(options)) {
    auto ds = std::make_shared<Dataset>();
    ds->fingerprint = dataset_fingerprint(records);
    ds->records = std::move(records);
    dataset_ = std::move(ds);
    for (int w = 0; w < std::max(1, workers); ++w) workers_.emplace_back([this] { worker_loop(); });
}

RunService::~RunService() {
    {
        std::lock_guard lock(mutex_);
        stopping_ = true;
    }
    queue_ready_.notify_all();
    for (auto& t : workers_) t.join();
}

std::shared_ptr<const RunService::Dataset> RunService::snapshot() const {
    std::lock_guard lock(mutex_);
    return dataset_;
}

std::string RunService::submit(const RunRequest& request) {
    request.validate();
    std::lock_guard lock(mutex_);
    const std::string id = make_run_id(request, dataset_->fingerprint);
    if (jobs_.count(id)) return id;
    auto job = std::make_shared<Job>();
    job->request = request;
    job->dataset = dataset_;
    job->status.run_id = id;
    job->status.message = "WAIT... QUEUED";
    jobs_[id] = job;
    queue_.push_back(id);
    queue_ready_.notify_one();
    return id;
}

void RunService::worker_loop() {
    for (;;) {
        std::shared_ptr<Job> job;
        {
            std::unique_lock lock(mutex_);
            queue_ready_.wait(lock, [&] { return stopping_ || !queue_.empty(); });
            if (stopping_) return;
            job = jobs_.at(queue_.front());
            queue_.pop_front();
            job->status.state = RunState::processing;
            job->status.message = "WAIT... PROCESSING";
            ++executed_;
        }
        changed_.notify_all();
        PipelineOptions opts = options_;
        opts.on_stage = [&](std::string_view name) {
            {
                std::lock_guard lock(mutex_);
                job->status.stage = std::string(name);
            }
            if (options_.on_stage) options_.on_stage(name);
        };
        std::shared_ptr<const RunArtifacts> artifacts;
        RunStatus final_status;
        ErrorCode code = ErrorCode::internal;
        try {
            artifacts = std::make_shared<const RunArtifacts>(
                run_pipeline(job->dataset->records, job->dataset->fingerprint, job->request, opts));
            final_status.state = RunState::done;
            final_status.message = "RESULTS IN PREDICTION & METRICS TAB";
        } catch (const Error& e) {
            code = e.code();
            final_status.state = RunState::failed;
            final_status.message = e.what();
            final_status.error_code = std::string(to_string(e.code()));
        } catch (const std::exception& e) {
            final_status.state = RunState::failed;
            final_status.message = e.what();
            final_status.error_code = std::string(to_string(ErrorCode::internal));
        }
        {
            std::lock_guard lock(mutex_);
            final_status.run_id = job->status.run_id;
            final_status.stage = job->status.stage;
            job->status = final_status;
            job->artifacts = artifacts;
            job->error = code;
        }
        changed_.notify_all();
    }
}

RunStatus RunService::status(const std::string& run_id) const {
    std::lock_guard lock(mutex_);
    auto it = jobs_.find(run_id);
    if (it == jobs_.end()) throw Error(ErrorCode::not_found, "unknown run id: " + run_id);
    return it->second->status;
}

RunStatus RunService::wait(const std::string& run_id) const {
    std::unique_lock lock(mutex_);
    auto it = jobs_.find(run_id);
    if (it == jobs_.end()) throw Error(ErrorCode::not_found, "unknown run id: " + run_id);
    const auto job = it->second;
    changed_.wait(lock, [&] {
        return job->status.state == RunState::done || job->status.state == RunState::failed;
    });
    return job->status;
}

std::shared_ptr<const RunArtifacts> RunService::result(const std::string& run_id) const {
    std::lock_guard lock(mutex_);
    auto it = jobs_.find(run_id);
    if (it == jobs_.end()) throw Error(ErrorCode::not_found, "unknown run id: " + run_id);
    const auto& job = *it->second;
    if (job.status.state == RunState::failed) throw Error(job.error, job.status.message);
    if (job.status.state != RunState::done) {
        throw Error(ErrorCode::invalid_argument, "run " + run_id + " is not finished (" +
                                                     std::string(to_string(job.status.state)) + ")");
    }
    return job.artifacts;
}

std::shared_ptr<const RunArtifacts> RunService::run_sync(const RunRequest& request) {
    const std::string id = submit(request);
    wait(id);
    return result(id);
}

void RunService::reload(std::vector<StudyRecord> records) {
    auto ds = std::make_shared<Dataset>();
    ds->fingerprint = dataset_fingerprint(records);
    ds->records = std::move(records);
    std::lock_guard lock(mutex_);
    dataset_ = std::move(ds);
}

Capabilities RunService::capabilities() const { return list_capabilities(snapshot()->records); }

RangeSummary RunService::range(const std::string& polymer) const {
    return range_of(snapshot()->records, polymer);
}

std::string RunService::fingerprint() const { return snapshot()->fingerprint; }

std::size_t RunService::executed_runs() const {
    std::lock_guard lock(mutex_);
    return executed_;
}

}  // namespace fibredist

namespace fibredist {

std::string comparison_json(const DistComparison& c) {
    const auto num = [](double v) { return std::isfinite(v) ? ordered_json(v) : ordered_json(nullptr); };
    ordered_json j;
    j["n_a"] = c.n_a;
    j["n_b"] = c.n_b;
    j["ks"] = c.ks ? ordered_json{{"D", num(c.ks->d)}, {"p", num(c.ks->p)}} : ordered_json(nullptr);
    j["mann_whitney"] = c.mwu ? ordered_json{{"U", num(c.mwu->u)}, {"p", num(c.mwu->p)}} : ordered_json(nullptr);
    j["welch_t"] = c.welch ? ordered_json{{"t", num(c.welch->t)}, {"df", num(c.welch->df)}, {"p", num(c.welch->p)}}
                           : ordered_json(nullptr);
    j["ovl"] = c.ovl ? num(*c.ovl) : ordered_json(nullptr);
    j["kl"] = c.kl ? num(*c.kl) : ordered_json(nullptr);
    j["wasserstein"] = c.wasserstein ? num(*c.wasserstein) : ordered_json(nullptr);
    const auto normal = [&](const std::optional<NormalityResult>& r) {
        return r ? ordered_json{{"W", num(r->w)}, {"p", num(r->p)}, {"n", r->n}} : ordered_json(nullptr);
    };
    j["shapiro_wilk_a"] = normal(c.normality_a);
    j["shapiro_wilk_b"] = normal(c.normality_b);
    j["notes"] = c.notes;
    return j.dump();
}

}  // namespace fibredist
