#include <chrono>
#include <csignal>
#include <fstream>
#include <iostream>
#include <sstream>

#include "CLI11.hpp"
#include "fibredist/csv.hpp"
#include "fibredist/http_api.hpp"
#include "fibredist/pipeline.hpp"
#include "fibredist/report.hpp"
#include "json.hpp"

using namespace fibredist;

namespace {

struct DataSource {
    std::string path;
    std::uint64_t synth_seed = kDefaultSeed;

    // Without a path, the default synthetic dataset stands in.
    std::vector<StudyRecord> load() const {
        if (path.empty()) {
            SyntheticConfig config;
            config.seed = synth_seed;
            return generate_synthetic(config).records;
        }
        LoadedDataset loaded = load_dataset(std::filesystem::path(path));
        return std::move(loaded.records);
    }
};

void add_data_option(CLI::App* cmd, DataSource& src) {
    cmd->add_option("--data", src.path, "Dataset CSV/TSV (default: built-in synthetic dataset)")
        ->envname("FIBREDIST_DATA");
}

std::vector<double> read_sample(const std::string& path, const std::string& column) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error(ErrorCode::io_error, "cannot open sample: " + path);
    std::string first;
    std::getline(in, first);
    in.clear();
    in.seekg(0);
    const auto rows = csv::read_all(in, csv::detect_delimiter(first));
    if (rows.empty()) throw Error(ErrorCode::invalid_argument, "empty sample file: " + path);
    std::size_t col = 0;
    std::size_t start = 0;
    if (!parse_numeric(rows[0].empty() ? "" : rows[0][0]) || !column.empty()) {
        start = 1;  // header row
        if (!column.empty()) {
            auto it = std::find(rows[0].begin(), rows[0].end(), column);
            if (it == rows[0].end()) throw Error(ErrorCode::missing_columns, "column not found in " + path + ": " + column);
            col = static_cast<std::size_t>(it - rows[0].begin());
        }
    }
    std::vector<double> out;
    for (std::size_t r = start; r < rows.size(); ++r) {
        if (col >= rows[r].size()) continue;
        if (auto v = parse_numeric(rows[r][col])) out.push_back(*v);
    }
    return out;
}

std::string benchmark_json(const std::vector<BenchmarkCell>& cells, double seconds) {
    using nlohmann::ordered_json;
    const auto stat = [](const MetricStat& s) {
        return ordered_json{{"mean", s.count ? ordered_json(s.mean) : ordered_json(nullptr)},
                            {"sd", s.count > 1 ? ordered_json(s.sd) : ordered_json(nullptr)},
                            {"folds", s.count}};
    };
    ordered_json list = ordered_json::array();
    for (const auto& c : cells) {
        ordered_json j{{"polymer", c.polymer}, {"model", std::string(to_string(c.kind))}};
        if (c.error.empty()) {
            j["RMSE"] = stat(c.summary.rmse);
            j["MAE"] = stat(c.summary.mae);
            j["Rsquared"] = stat(c.summary.r2);
        } else {
            j["error"] = c.error;
        }
        list.push_back(j);
    }
    return ordered_json{{"cells", list}, {"seconds", seconds}, {"table", render_benchmark(cells)}}.dump(2);
}

HttpServer* g_server = nullptr;

void on_signal(int) {
    if (g_server) g_server->stop();
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Fibre diameter distribution engine"};
    app.require_subcommand(1);
    int threads = 0;
    std::string backend_name = "openmp";
    app.add_option("--threads", threads, "OpenMP threads (0: runtime default)")->envname("FIBREDIST_THREADS");
    app.add_option("--backend", backend_name, "Kernel backend")->check(CLI::IsMember({"serial", "openmp"}));

    // ingest
    auto* ingest = app.add_subcommand("ingest", "Validate a dataset and print the ingest report");
    std::string ingest_path;
    ingest->add_option("path", ingest_path, "CSV/TSV file")->required();

    // synth
    auto* synth = app.add_subcommand("synth", "Write the synthetic dataset as CSV");
    SyntheticConfig synth_config;
    std::string synth_out, truth_out;
    synth->add_option("--polymer", synth_config.polymer);
    synth->add_option("--studies", synth_config.n_studies)->check(CLI::PositiveNumber);
    synth->add_option("--rows-per-study", synth_config.rows_per_study)->check(CLI::PositiveNumber);
    synth->add_option("--conditions-per-study", synth_config.conditions_per_study, "0: one condition per row");
    synth->add_option("--noise-sd", synth_config.noise_sd)->check(CLI::NonNegativeNumber);
    synth->add_option("--study-offset-sd", synth_config.study_offset_sd)->check(CLI::NonNegativeNumber);
    synth->add_option("--seed", synth_config.seed);
    synth->add_option("-o,--out", synth_out, "Output file (default: stdout)");
    synth->add_option("--truth", truth_out, "Also write per-row ground truth and study offset");

    // benchmark
    auto* bench = app.add_subcommand("benchmark", "Nested-CV metrics for every polymer and model");
    DataSource bench_data;
    add_data_option(bench, bench_data);
    std::vector<std::string> bench_models, bench_polymers;
    std::uint64_t bench_seed = kDefaultSeed;
    std::string bench_format = "text";
    bench->add_option("--models", bench_models, "Subset of models (default: all seven)");
    bench->add_option("--polymers", bench_polymers, "Subset of polymers (default: all)");
    bench->add_option("--seed", bench_seed)->envname("FIBREDIST_SEED");
    bench->add_option("--format", bench_format)->check(CLI::IsMember({"text", "json"}));

    // run
    auto* run = app.add_subcommand("run", "Run the full pipeline and write the report bundle");
    DataSource run_data;
    add_data_option(run, run_data);
    RunRequest request;
    std::string model_name, bundle_path = "report.zip", result_path, created_at;
    run->add_option("--polymer", request.polymer)->required();
    run->add_option("--model", model_name)->required();
    run->add_option("--concentration", request.inputs.concentration)->required();
    run->add_option("--needle-diameter", request.inputs.needle_diameter)->required();
    run->add_option("--rotation-speed", request.inputs.rotation_speed)->required();
    run->add_option("--voltage", request.inputs.voltage)->required();
    run->add_option("--flow-rate", request.inputs.flow_rate)->required();
    run->add_option("--distance", request.inputs.distance)->required();
    run->add_option("--collector", request.inputs.collector_type);
    run->add_flag("--include-collector", request.include_collector);
    run->add_option("--seed", request.seed)->envname("FIBREDIST_SEED");
    run->add_option("--bootstrap-draws", request.bootstrap_draws);
    run->add_option("--shap-sims", request.shap_sims);
    run->add_option("-o,--out", bundle_path, "Bundle path");
    run->add_option("--result-json", result_path, "Also write the JSON result payload");
    run->add_option("--created-at", created_at, "Manifest timestamp (default: SOURCE_DATE_EPOCH or now)");

    // compare
    auto* compare = app.add_subcommand("compare", "Two-sample distribution battery");
    std::string sample_a, sample_b, column;
    compare->add_option("a", sample_a, "Reference sample CSV")->required();
    compare->add_option("b", sample_b, "Simulated sample CSV")->required();
    compare->add_option("--column", column, "Column name (default: first column)");

    // serve
    auto* serve = app.add_subcommand("serve", "Start the HTTP JSON API");
    DataSource serve_data;
    add_data_option(serve, serve_data);
    std::string host = "127.0.0.1";
    int port = 8080, workers = 1;
    serve->add_option("--host", host);
    serve->add_option("--port", port)->envname("FIBREDIST_PORT");
    serve->add_option("--workers", workers)->envname("FIBREDIST_WORKERS")->check(CLI::PositiveNumber);

    CLI11_PARSE(app, argc, argv);
    parallel::set_threads(threads);
    const Backend backend = backend_name == "serial" ? Backend::serial : Backend::openmp;

    try {
        if (*ingest) {
            const LoadedDataset loaded = load_dataset(std::filesystem::path(ingest_path));
            auto report = nlohmann::ordered_json::parse(loaded.report.to_json());
            report["polymers"] = list_polymers(loaded.records);
            report["fingerprint"] = dataset_fingerprint(loaded.records);
            std::cout << report.dump(2) << '\n';
        } else if (*synth) {
            const SyntheticDataset ds = generate_synthetic(synth_config);
            if (synth_out.empty()) {
                write_dataset_csv(std::cout, ds.records);
            } else {
                std::ofstream out(synth_out, std::ios::binary);
                if (!out) throw Error(ErrorCode::io_error, "cannot write " + synth_out);
                write_dataset_csv(out, ds.records);
            }
            if (!truth_out.empty()) {
                std::ofstream out(truth_out, std::ios::binary);
                if (!out) throw Error(ErrorCode::io_error, "cannot write " + truth_out);
                out << "row,ground_truth,study_offset\n";
                std::size_t row = 0;
                for (std::size_t s = 0; s < ds.study_offsets.size(); ++s) {
                    const auto per = static_cast<std::size_t>(synth_config.rows_per_study);
                    for (std::size_t r = 0; r < per; ++r, ++row) {
                        out << row << ',' << csv::format_double(ds.ground_truth[row]) << ','
                            << csv::format_double(ds.study_offsets[s]) << '\n';
                    }
                }
            }
        } else if (*bench) {
            const auto records = bench_data.load();
            std::vector<ModelKind> kinds;
            for (const auto& m : bench_models) kinds.push_back(parse_model_kind(m));
            if (kinds.empty()) kinds.assign(kAllModelKinds.begin(), kAllModelKinds.end());
            if (bench_polymers.empty()) bench_polymers = list_polymers(records);
            CVOptions options;
            options.seed = bench_seed;
            options.backend = backend;
            const auto start = std::chrono::steady_clock::now();
            const auto cells = benchmark(records, bench_polymers, kinds, options);
            const double seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
            if (bench_format == "json") std::cout << benchmark_json(cells, seconds) << '\n';
            else std::cout << render_benchmark(cells);
            for (const auto& c : cells) {
                if (!c.error.empty()) return 2;
            }
        } else if (*run) {
            request.model = parse_model_kind(model_name);
            const auto records = run_data.load();
            PipelineOptions options;
            options.backend = backend;
            options.created_at = created_at;
            options.on_stage = [](std::string_view stage) { std::cerr << "[run] " << stage << '\n'; };
            const RunArtifacts artifacts = run_pipeline(records, dataset_fingerprint(records), request, options);
            write_bundle(build_report(artifacts), bundle_path);
            if (!result_path.empty()) {
                std::ofstream out(result_path, std::ios::binary);
                if (!out) throw Error(ErrorCode::io_error, "cannot write " + result_path);
                out << result_json(artifacts) << '\n';
            }
            for (const auto& [key, value] : summary_rows(artifacts)) std::cout << key << ": " << value << '\n';
            std::cout << "bundle: " << bundle_path << '\n';
        } else if (*compare) {
            const auto a = read_sample(sample_a, column);
            const auto b = read_sample(sample_b, column);
            std::cout << nlohmann::ordered_json::parse(comparison_json(compare_distributions(a, b))).dump(2) << '\n';
        } else if (*serve) {
            RunService service(serve_data.load(), workers, PipelineOptions{backend, {}, {}});
            HttpServer server(service, [&] { return serve_data.load(); });
            const int bound = server.bind(host, port);
            g_server = &server;
            std::signal(SIGINT, on_signal);
            std::signal(SIGTERM, on_signal);
            std::cerr << "listening on http://" << host << ':' << bound << " (dataset " << service.fingerprint().substr(0, 12)
                      << ")\n";
            server.listen();
            g_server = nullptr;
        }
    } catch (const Error& e) {
        std::cerr << "error [" << to_string(e.code()) << "]: " << e.what() << '\n';
        return 1;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    }
    return 0;
}
