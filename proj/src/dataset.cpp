#include "fibredist/dataset.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cmath>
#include <fstream>
#include <set>
#include <sstream>
#include <unordered_map>

#include "json.hpp"

#include "fibredist/csv.hpp"
#include "fibredist/hash.hpp"

namespace fibredist {

namespace {

std::string trim(std::string_view s) {
    std::size_t b = 0, e = s.size();
    while (b < e && std::isspace(static_cast<unsigned char>(s[b]))) ++b;
    while (e > b && std::isspace(static_cast<unsigned char>(s[e - 1]))) --e;
    return std::string(s.substr(b, e - b));
}

std::string lower(std::string s) {
    for (char& c : s) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
    return s;
}

std::string upper(std::string s) {
    for (char& c : s) c = static_cast<char>(std::toupper(static_cast<unsigned char>(c)));
    return s;
}

bool is_digit(char c) { return c >= '0' && c <= '9'; }
bool is_sep(char c) { return c == '.' || c == ','; }

std::string normalise_header(std::string_view name) {
    std::string h = lower(trim(name));
    // Strip a UTF-8 byte-order mark on the first header cell.
    if (h.size() >= 3 && static_cast<unsigned char>(h[0]) == 0xEF) h = h.substr(3);
    for (char& c : h) {
        if (c == ' ' || c == '-') c = '_';
    }
    if (h == "fiber_diameter") return "fibre_diameter";
    if (h == "collector") return "collector_type";
    return h;
}

std::string normalise_solvent(std::string_view s) {
    std::string t = upper(trim(s));
    if (t.empty() || t == "NA" || t == "N/A" || t == "-" || t == "NONE") {
        return std::string(kNoSolvent);
    }
    return t;
}

bool is_non_finite_text(std::string_view text) {
    std::string t = lower(trim(text));
    if (!t.empty() && (t[0] == '+' || t[0] == '-')) t = t.substr(1);
    return t == "nan" || t == "inf" || t == "infinity";
}

constexpr std::array<std::string_view, 18> kSchema = {
    "doi",           "polymer",         "solvent1",      "solvent2",       "solvent3",
    "solvent1_ratio", "solvent2_ratio", "solvent3_ratio", "concentration", "needle_diameter",
    "collector_type", "rotation_speed", "voltage",        "flow_rate",     "distance",
    "temperature",   "humidity",        "fibre_diameter"};

constexpr std::array<std::string_view, 9> kRequired = {
    "doi",     "polymer",   "concentration", "needle_diameter", "rotation_speed",
    "voltage", "flow_rate", "distance",      "fibre_diameter"};

}  // namespace

ProcessInputs ProcessInputs::from_values(const std::array<double, 6>& v, std::string collector) {
    return {v[0], v[1], v[2], v[3], v[4], v[5], std::move(collector)};
}

void ProcessInputs::validate() const {
    const auto v = values();
    for (std::size_t i = 0; i < v.size(); ++i) {
        if (!std::isfinite(v[i]) || v[i] < 0) {
            throw Error(ErrorCode::invalid_argument,
                        std::string(kProcessFeatures[i]) + " must be a finite non-negative number");
        }
    }
}

std::optional<double> parse_numeric(std::string_view text) {
    // Locate the first numeric token: a digit, or a separator followed by one.
    std::size_t start = std::string_view::npos;
    for (std::size_t i = 0; i < text.size(); ++i) {
        if (is_digit(text[i]) ||
            (is_sep(text[i]) && i + 1 < text.size() && is_digit(text[i + 1]))) {
            start = i;
            break;
        }
    }
    if (start == std::string_view::npos) return std::nullopt;
    const bool negative = start > 0 && text[start - 1] == '-';

    std::size_t end = start;
    while (end < text.size() && (is_digit(text[end]) || is_sep(text[end]))) ++end;
    std::string mantissa(text.substr(start, end - start));
    while (!mantissa.empty() && is_sep(mantissa.back())) mantissa.pop_back();

    std::string exponent;
    if (end < text.size() && (text[end] == 'e' || text[end] == 'E')) {
        std::size_t j = end + 1;
        std::string e = "e";
        if (j < text.size() && (text[j] == '+' || text[j] == '-')) e.push_back(text[j++]);
        const std::size_t digits_from = j;
        while (j < text.size() && is_digit(text[j])) e.push_back(text[j++]);
        if (j > digits_from) exponent = e;
    }

    const auto commas = std::count(mantissa.begin(), mantissa.end(), ',');
    const auto dots = std::count(mantissa.begin(), mantissa.end(), '.');
    std::string digits;
    if (commas > 0 && dots > 0) {
        const std::size_t decimal_at = mantissa.find_last_of(".,");
        for (std::size_t i = 0; i < mantissa.size(); ++i) {
            if (i == decimal_at) {
                digits.push_back('.');
            } else if (!is_sep(mantissa[i])) {
                digits.push_back(mantissa[i]);
            }
        }
    } else if (commas + dots == 1) {
        digits = mantissa;
        std::replace(digits.begin(), digits.end(), ',', '.');
    } else {
        // No separator, or one kind repeated: thousands grouping.
        for (char c : mantissa) {
            if (!is_sep(c)) digits.push_back(c);
        }
    }
    if (!digits.empty() && digits.front() == '.') digits.insert(digits.begin(), '0');
    digits += exponent;

    double value = 0;
    const auto [ptr, ec] = std::from_chars(digits.data(), digits.data() + digits.size(), value);
    if (ec != std::errc() || ptr != digits.data() + digits.size()) return std::nullopt;
    if (negative) value = -value;
    if (!std::isfinite(value)) return std::nullopt;
    return value;
}

std::string IngestReport::to_json() const {
    nlohmann::ordered_json j;
    j["rows_read"] = rows_read;
    j["rows_kept"] = rows_kept;
    j["dropped"] = {{"missing", dropped_missing},
                    {"non_finite_target", dropped_non_finite_target},
                    {"non_positive_target", dropped_non_positive_target}};
    j["ratio_sum_warnings"] = ratio_sum_warnings;
    j["missing_by_column"] = missing_by_column;
    j["delimiter"] = delimiter == '\t' ? std::string("\\t") : std::string(1, delimiter);
    return j.dump(2);
}

LoadedDataset load_dataset(std::istream& in) {
    std::string text((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    if (in.bad()) throw Error(ErrorCode::io_error, "failed to read dataset stream");
    const std::string first_line = text.substr(0, text.find('\n'));
    LoadedDataset out;
    out.report.delimiter = csv::detect_delimiter(first_line);

    std::istringstream stream(text);
    auto rows = csv::read_all(stream, out.report.delimiter);
    if (rows.empty()) throw Error(ErrorCode::missing_columns, "dataset has no header row");

    std::unordered_map<std::string, std::size_t> column;
    for (std::size_t i = 0; i < rows[0].size(); ++i) {
        column.emplace(normalise_header(rows[0][i]), i);
    }
    std::vector<std::string> missing;
    for (auto name : kRequired) {
        if (!column.count(std::string(name))) missing.emplace_back(name);
    }
    if (!missing.empty()) {
        std::string msg = "missing required columns:";
        for (const auto& m : missing) msg += " " + m;
        throw Error(ErrorCode::missing_columns, msg);
    }

    auto& report = out.report;
    for (std::size_t r = 1; r < rows.size(); ++r) {
        const auto& row = rows[r];
        ++report.rows_read;
        auto cell = [&](std::string_view name) -> std::string {
            auto it = column.find(std::string(name));
            if (it == column.end() || it->second >= row.size()) return {};
            return trim(row[it->second]);
        };

        const std::string target_text = cell("fibre_diameter");
        if (is_non_finite_text(target_text)) {
            ++report.dropped_non_finite_target;
            continue;
        }
        bool complete = true;
        auto note_missing = [&](std::string_view name) {
            ++report.missing_by_column[std::string(name)];
            complete = false;
        };
        const auto target = parse_numeric(target_text);
        if (!target) note_missing("fibre_diameter");

        StudyRecord rec;
        rec.doi = cell("doi");
        rec.polymer = cell("polymer");
        if (rec.doi.empty()) note_missing("doi");
        if (rec.polymer.empty()) note_missing("polymer");

        std::array<double, 6> process{};
        for (std::size_t k = 0; k < kProcessFeatures.size(); ++k) {
            const auto v = parse_numeric(cell(kProcessFeatures[k]));
            if (!v) {
                note_missing(kProcessFeatures[k]);
            } else {
                process[k] = *v;
            }
        }
        if (!complete) {
            ++report.dropped_missing;
            continue;
        }
        if (*target <= 0) {
            ++report.dropped_non_positive_target;
            continue;
        }
        rec.fibre_diameter = *target;
        rec.concentration = process[0];
        rec.needle_diameter = process[1];
        rec.rotation_speed = process[2];
        rec.voltage = process[3];
        rec.flow_rate = process[4];
        rec.distance = process[5];

        for (int s = 0; s < 3; ++s) {
            const std::string idx = std::to_string(s + 1);
            rec.solvents[s] = normalise_solvent(cell("solvent" + idx));
            rec.solvent_ratios[s] = parse_numeric(cell("solvent" + idx + "_ratio"));
            if (!rec.solvent_ratios[s] && rec.solvents[s] == kNoSolvent) rec.solvent_ratios[s] = 0.0;
        }
        if (rec.solvent_ratios[0] && rec.solvent_ratios[1] && rec.solvent_ratios[2]) {
            const double sum =
                *rec.solvent_ratios[0] + *rec.solvent_ratios[1] + *rec.solvent_ratios[2];
            if (std::abs(sum - 100.0) > 0.5) ++report.ratio_sum_warnings;
        }
        const std::string collector = cell("collector_type");
        rec.collector_type = collector.empty() ? std::string(kNoSolvent) : collector;
        rec.temperature = parse_numeric(cell("temperature"));
        rec.humidity = parse_numeric(cell("humidity"));
        out.records.push_back(std::move(rec));
    }
    report.rows_kept = out.records.size();
    return out;
}

LoadedDataset load_dataset(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error(ErrorCode::io_error, "cannot open dataset: " + path.string());
    return load_dataset(in);
}

void write_dataset_csv(std::ostream& out, const std::vector<StudyRecord>& records) {
    csv::Row header(kSchema.begin(), kSchema.end());
    out << csv::join(header) << '\n';
    auto opt = [](const std::optional<double>& v) {
        return v ? csv::format_double(*v) : std::string{};
    };
    for (const auto& r : records) {
        csv::Row row = {r.doi,
                        r.polymer,
                        r.solvents[0],
                        r.solvents[1],
                        r.solvents[2],
                        opt(r.solvent_ratios[0]),
                        opt(r.solvent_ratios[1]),
                        opt(r.solvent_ratios[2]),
                        csv::format_double(r.concentration),
                        csv::format_double(r.needle_diameter),
                        r.collector_type,
                        csv::format_double(r.rotation_speed),
                        csv::format_double(r.voltage),
                        csv::format_double(r.flow_rate),
                        csv::format_double(r.distance),
                        opt(r.temperature),
                        opt(r.humidity),
                        csv::format_double(r.fibre_diameter)};
        out << csv::join(row) << '\n';
    }
}

std::string dataset_fingerprint(const std::vector<StudyRecord>& records) {
    std::ostringstream os;
    write_dataset_csv(os, records);
    return sha256_hex(os.str());
}

std::vector<std::string> list_polymers(const std::vector<StudyRecord>& records) {
    std::set<std::string> names;
    for (const auto& r : records) names.insert(r.polymer);
    return {names.begin(), names.end()};
}

std::string normalise_study_id(std::string_view doi) { return lower(trim(doi)); }

PolymerTable PolymerTable::take_rows(const std::vector<int>& rows) const {
    PolymerTable out;
    out.polymer = polymer;
    out.feature_names = feature_names;
    out.features.resize(static_cast<Eigen::Index>(rows.size()), features.cols());
    out.target.resize(static_cast<Eigen::Index>(rows.size()));
    std::unordered_map<int, int> remap;
    for (std::size_t i = 0; i < rows.size(); ++i) {
        const int r = rows[i];
        out.features.row(static_cast<Eigen::Index>(i)) = features.row(r);
        out.target(static_cast<Eigen::Index>(i)) = target(r);
        auto [it, inserted] = remap.emplace(study[r], static_cast<int>(out.study_labels.size()));
        if (inserted) out.study_labels.push_back(study_labels[study[r]]);
        out.study.push_back(it->second);
        out.source_rows.push_back(source_rows[r]);
    }
    return out;
}

PolymerTable polymer_subset(const std::vector<StudyRecord>& records, const std::string& polymer,
                            bool include_collector) {
    std::vector<std::size_t> rows;
    for (std::size_t i = 0; i < records.size(); ++i) {
        if (records[i].polymer == polymer) rows.push_back(i);
    }
    if (rows.empty()) {
        std::string msg = "unknown polymer '" + polymer + "'; available:";
        for (const auto& p : list_polymers(records)) msg += " " + p;
        throw Error(ErrorCode::unknown_polymer, msg);
    }

    PolymerTable t;
    t.polymer = polymer;
    t.feature_names.assign(kProcessFeatures.begin(), kProcessFeatures.end());
    std::vector<std::string> collectors;
    if (include_collector) {
        std::set<std::string> labels;
        for (auto i : rows) labels.insert(records[i].collector_type);
        if (labels.size() > 1) {
            collectors.assign(labels.begin(), labels.end());
            for (const auto& c : collectors) t.feature_names.push_back("collector_" + c);
        }
    }

    const auto n = static_cast<Eigen::Index>(rows.size());
    t.features = Matrix::Zero(n, static_cast<Eigen::Index>(t.feature_names.size()));
    t.target.resize(n);
    std::unordered_map<std::string, int> group_of;
    for (Eigen::Index r = 0; r < n; ++r) {
        const auto& rec = records[rows[static_cast<std::size_t>(r)]];
        const auto p = rec.process();
        for (int k = 0; k < 6; ++k) t.features(r, k) = p[k];
        for (std::size_t c = 0; c < collectors.size(); ++c) {
            t.features(r, static_cast<Eigen::Index>(6 + c)) = rec.collector_type == collectors[c];
        }
        t.target(r) = rec.fibre_diameter;
        const std::string sid = normalise_study_id(rec.doi);
        auto [it, inserted] = group_of.emplace(sid, static_cast<int>(t.study_labels.size()));
        if (inserted) t.study_labels.push_back(sid);
        t.study.push_back(it->second);
        t.source_rows.push_back(rows[static_cast<std::size_t>(r)]);
    }
    if (t.n_studies() < 2) {
        throw Error(ErrorCode::insufficient_studies,
                    "polymer '" + polymer + "' has fewer than 2 distinct studies; "
                    "leave-one-study-out validation is impossible");
    }
    return t;
}

Vector feature_row(const PolymerTable& table, const ProcessInputs& inputs) {
    Vector row = Vector::Zero(static_cast<Eigen::Index>(table.cols()));
    const auto v = inputs.values();
    for (int k = 0; k < 6; ++k) row(k) = v[k];
    for (std::size_t c = 6; c < table.cols(); ++c) {
        row(static_cast<Eigen::Index>(c)) =
            table.feature_names[c] == "collector_" + inputs.collector_type;
    }
    return row;
}

NormalizationRecipe fit_recipe(const Matrix& train_rows, const std::vector<std::string>& names) {
    if (train_rows.rows() < 2) {
        throw Error(ErrorCode::degenerate_data, "normalisation needs at least 2 training rows");
    }
    if (static_cast<std::size_t>(train_rows.cols()) != names.size()) {
        throw Error(ErrorCode::invalid_argument, "feature name count does not match columns");
    }
    NormalizationRecipe recipe;
    recipe.all_features = names;
    std::vector<double> means, sds;
    const double n = static_cast<double>(train_rows.rows());
    for (Eigen::Index j = 0; j < train_rows.cols(); ++j) {
        const auto col = train_rows.col(j);
        if (col.maxCoeff() == col.minCoeff()) {
            recipe.dropped_zero_variance.push_back(names[static_cast<std::size_t>(j)]);
            continue;
        }
        const double mean = col.mean();
        const double sd = std::sqrt((col.array() - mean).square().sum() / (n - 1.0));
        recipe.kept_features.push_back(names[static_cast<std::size_t>(j)]);
        recipe.kept_columns.push_back(static_cast<int>(j));
        means.push_back(mean);
        sds.push_back(sd);
    }
    if (recipe.kept_features.empty()) {
        throw Error(ErrorCode::degenerate_data, "all predictors have zero variance");
    }
    recipe.mean = Eigen::Map<Vector>(means.data(), static_cast<Eigen::Index>(means.size()));
    recipe.sd = Eigen::Map<Vector>(sds.data(), static_cast<Eigen::Index>(sds.size()));
    return recipe;
}

Matrix apply_recipe(const NormalizationRecipe& recipe, const Matrix& rows) {
    if (static_cast<std::size_t>(rows.cols()) != recipe.all_features.size()) {
        throw Error(ErrorCode::missing_feature,
                    "expected " + std::to_string(recipe.all_features.size()) + " feature columns, got " +
                        std::to_string(rows.cols()));
    }
    Matrix out(rows.rows(), static_cast<Eigen::Index>(recipe.kept_columns.size()));
    for (std::size_t k = 0; k < recipe.kept_columns.size(); ++k) {
        const auto j = static_cast<Eigen::Index>(k);
        out.col(j) = (rows.col(recipe.kept_columns[k]).array() - recipe.mean(j)) / recipe.sd(j);
    }
    return out;
}

Matrix apply_recipe(const NormalizationRecipe& recipe, const Matrix& rows,
                    const std::vector<std::string>& names) {
    Matrix out(rows.rows(), static_cast<Eigen::Index>(recipe.kept_features.size()));
    for (std::size_t k = 0; k < recipe.kept_features.size(); ++k) {
        const auto it = std::find(names.begin(), names.end(), recipe.kept_features[k]);
        if (it == names.end()) {
            throw Error(ErrorCode::missing_feature, "missing feature: " + recipe.kept_features[k]);
        }
        const auto src = static_cast<Eigen::Index>(it - names.begin());
        const auto j = static_cast<Eigen::Index>(k);
        out.col(j) = (rows.col(src).array() - recipe.mean(j)) / recipe.sd(j);
    }
    return out;
}

const FeatureRange* RangeSummary::find(std::string_view name) const {
    for (const auto& f : features) {
        if (f.feature == name) return &f;
    }
    return nullptr;
}

RangeSummary range_of(const PolymerTable& table) {
    RangeSummary out;
    for (int k = 0; k < 6; ++k) {
        out.features.push_back({std::string(kProcessFeatures[k]), table.features.col(k).minCoeff(),
                                table.features.col(k).maxCoeff()});
    }
    return out;
}

RangeSummary range_of(const std::vector<StudyRecord>& records, const std::string& polymer) {
    RangeSummary out;
    bool any = false;
    for (const auto& r : records) {
        if (r.polymer != polymer) continue;
        const auto p = r.process();
        if (!any) {
            for (int k = 0; k < 6; ++k) out.features.push_back({std::string(kProcessFeatures[k]), p[k], p[k]});
            any = true;
            continue;
        }
        for (int k = 0; k < 6; ++k) {
            out.features[k].min = std::min(out.features[k].min, p[k]);
            out.features[k].max = std::max(out.features[k].max, p[k]);
        }
    }
    if (!any) throw Error(ErrorCode::unknown_polymer, "unknown polymer '" + polymer + "'");
    return out;
}

std::vector<RangeViolation> range_check(const ProcessInputs& inputs, const RangeSummary& range) {
    std::vector<RangeViolation> out;
    const auto v = inputs.values();
    for (int k = 0; k < 6; ++k) {
        const auto* f = range.find(kProcessFeatures[k]);
        if (!f) continue;
        if (v[k] < f->min || v[k] > f->max) out.push_back({f->feature, v[k], f->min, f->max});
    }
    return out;
}

double synthetic_ground_truth(const std::array<double, 6>& p) {
    const double c = p[0], g = p[1], rpm = p[2], v = p[3], q = p[4], d = p[5];
    const double dd = (d - 15.0) / 5.0;
    return 380.0 + 220.0 / (1.0 + std::exp(-(c - 12.0) / 0.8)) + 8.0 * (22.0 - g) +
           200.0 * std::tanh((v - 17.0) / 2.5) * (q - 1.1) + 120.0 * dd * dd + 0.01 * rpm;
}

SyntheticDataset generate_synthetic(const SyntheticConfig& config) {
    if (config.n_studies <= 0 || config.rows_per_study <= 0 || config.conditions_per_study < 0 ||
        config.noise_sd < 0 || config.study_offset_sd < 0) {
        throw Error(ErrorCode::invalid_argument, "synthetic sizes must be positive");
    }
    static constexpr std::array<double, 6> kGauges = {18, 20, 21, 22, 23, 25};
    static constexpr std::array<double, 5> kSpeeds = {0, 0, 500, 1000, 2000};
    struct SolventSystem {
        std::array<const char*, 3> names;
        std::array<double, 3> ratios;
    };
    static constexpr std::array<SolventSystem, 4> kSystems = {{
        {{"WATER", "NONE", "NONE"}, {100, 0, 0}},
        {{"DMF", "THF", "NONE"}, {60, 40, 0}},
        {{"CHLOROFORM", "DMF", "NONE"}, {70, 30, 0}},
        {{"DCM", "DMF", "ETHANOL"}, {50, 30, 20}},
    }};

    SyntheticDataset out;
    const int conditions = config.conditions_per_study == 0
                               ? config.rows_per_study
                               : std::min(config.conditions_per_study, config.rows_per_study);
    for (int s = 0; s < config.n_studies; ++s) {
        Rng rng(derive_seed(config.seed, "synthetic.study", static_cast<std::uint64_t>(s)));
        const double gauge = kGauges[uniform_index(rng, kGauges.size())];
        const double rpm = kSpeeds[uniform_index(rng, kSpeeds.size())];
        const double v0 = 10.0 + 15.0 * uniform01(rng);
        const double q0 = 0.2 + 1.8 * uniform01(rng);
        const double d0 = 10.0 + 10.0 * uniform01(rng);
        const double offset = config.study_offset_sd * standard_normal(rng);
        const auto& system = kSystems[uniform_index(rng, kSystems.size())];
        out.study_offsets.push_back(offset);

        const std::string doi = "10.5555/synthetic." + config.polymer + "." + std::to_string(s + 1);
        for (int k = 0; k < conditions; ++k) {
            const double c = 4.0 + 16.0 * uniform01(rng);
            const double v = v0 + (6.0 * uniform01(rng) - 3.0);
            const double q = std::clamp(q0 * (0.6 + 0.8 * uniform01(rng)), 0.1, 2.0);
            const double d = d0 + (6.0 * uniform01(rng) - 3.0);
            const int reps = config.rows_per_study / conditions + (k < config.rows_per_study % conditions);
            for (int r = 0; r < reps; ++r) {
                StudyRecord rec;
                rec.doi = doi;
                rec.polymer = config.polymer;
                for (int j = 0; j < 3; ++j) {
                    rec.solvents[j] = system.names[j];
                    rec.solvent_ratios[j] = system.ratios[j];
                }
                rec.concentration = c;
                rec.needle_diameter = gauge;
                rec.collector_type = rpm > 0 ? "rotating drum" : "flat plate";
                rec.rotation_speed = rpm;
                rec.voltage = v;
                rec.flow_rate = q;
                rec.distance = d;
                rec.temperature = 20.0 + 5.0 * uniform01(rng);
                rec.humidity = 30.0 + 30.0 * uniform01(rng);
                const double truth = synthetic_ground_truth(rec.process());
                const double noise = config.noise_sd * standard_normal(rng);
                rec.fibre_diameter = std::max(1.0, truth + offset + noise);
                out.ground_truth.push_back(truth);
                out.records.push_back(std::move(rec));
            }
        }
    }
    return out;
}

}  // namespace fibredist
