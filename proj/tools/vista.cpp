#include "vista/eval.hpp"
#include "vista/http_backend.hpp"
#include "vista/mock_backend.hpp"
#include "vista/pilot.hpp"
#include "vista/util.hpp"

#include <CLI11.hpp>

#include <filesystem>
#include <iostream>

namespace {

using namespace vista;
namespace fs = std::filesystem;

struct BackendOptions {
    std::string backend_url;
    std::string model;
    std::string mock_fixture;
    std::string api_key_env = "VISTA_API_KEY";
    std::string embedding_model;
    int timeout_ms = 120000;
    int max_retries = 3;
    int concurrency = 4;
    bool hidden_state_endpoint = false;
    std::string trace_path;
};

void add_backend_options(CLI::App* cmd, BackendOptions& options) {
    cmd->add_option("--backend-url", options.backend_url,
                    "chat-completions base URL, e.g. http://localhost:8000/v1");
    cmd->add_option("--model", options.model, "model name sent to the backend");
    cmd->add_option("--mock-fixture", options.mock_fixture,
                    "scripted offline backend fixture (JSON)");
    cmd->add_option("--api-key-env", options.api_key_env,
                    "environment variable holding the API key");
    cmd->add_option("--embedding-model", options.embedding_model,
                    "model name for /embeddings (defaults to --model)");
    cmd->add_option("--timeout-ms", options.timeout_ms, "per-request timeout");
    cmd->add_option("--retries", options.max_retries, "transport retry budget");
    cmd->add_option("--concurrency", options.concurrency, "max in-flight backend requests");
    cmd->add_flag("--hidden-state-endpoint", options.hidden_state_endpoint,
                  "backend exposes the /hidden_state sidecar");
    cmd->add_option("--trace", options.trace_path, "JSONL request/response log");
}

std::unique_ptr<Backend> make_backend(const BackendOptions& options) {
    if (!options.mock_fixture.empty()) {
        return std::make_unique<MockBackend>(MockBackend::load_fixture(options.mock_fixture));
    }
    if (options.backend_url.empty()) {
        throw CLI::ValidationError("backend", "pass --backend-url (with --model) or --mock-fixture");
    }
    if (options.model.empty()) {
        throw CLI::ValidationError("backend", "--backend-url needs --model");
    }
    HttpBackendConfig config;
    config.base_url = options.backend_url;
    config.model = options.model;
    config.api_key_env = options.api_key_env;
    if (!options.embedding_model.empty()) config.embedding_model = options.embedding_model;
    config.timeout_ms = options.timeout_ms;
    config.max_retries = options.max_retries;
    config.concurrency_limit = options.concurrency;
    config.hidden_state_endpoint = options.hidden_state_endpoint;
    config.trace_path = options.trace_path;
    return std::make_unique<HttpBackend>(std::move(config));
}

struct PipelineOptions {
    std::string router = "taxonomy";
    std::string verify = "lrc";
    int samples = 5;
    double theta = 0.85;
    double complexity_theta = 0.65;
    bool no_question_focus = false;
    bool no_cot = false;
    double temperature = -1.0;
    int max_tokens = 1024;
    long long seed = -1;
    int workers = 1;
    std::string taxonomy_file;
};

void add_pipeline_options(CLI::App* cmd, PipelineOptions& options, bool with_samples = true) {
    cmd->add_option("--router", options.router, "taxonomy | complexity | always_deep | always_direct");
    cmd->add_option("--verify", options.verify, "naive | majority | bon | lrc");
    if (with_samples) cmd->add_option("--samples", options.samples, "reasoning paths per deep item");
    cmd->add_option("--theta", options.theta, "clustering similarity threshold");
    cmd->add_option("--complexity-theta", options.complexity_theta,
                    "score threshold for the complexity router");
    cmd->add_flag("--no-question-focus", options.no_question_focus,
                  "drop the question-focus clause from the summary prompt");
    cmd->add_flag("--no-cot", options.no_cot, "drop the step-by-step trigger");
    cmd->add_option("--temperature", options.temperature,
                    "multi-sample temperature (default 0.7 when samples > 1)");
    cmd->add_option("--max-tokens", options.max_tokens, "completion budget per call");
    cmd->add_option("--seed", options.seed, "sampling seed forwarded to the backend");
    cmd->add_option("--workers", options.workers, "concurrent items");
    cmd->add_option("--taxonomy", options.taxonomy_file, "taxonomy document overriding the built-in");
}

PipelineConfig make_pipeline_config(const PipelineOptions& options,
                                    std::unique_ptr<FeatureTable>& table_storage) {
    PipelineConfig config;
    config.router = parse_router_kind(options.router);
    config.verify = parse_verify_method(options.verify);
    config.n_samples = options.samples;
    config.theta = options.theta;
    config.complexity.theta = options.complexity_theta;
    config.prompt.with_question_focus = !options.no_question_focus;
    config.prompt.with_cot_trigger = !options.no_cot;
    if (options.temperature >= 0) config.temperature = options.temperature;
    config.max_tokens = options.max_tokens;
    if (options.seed >= 0) config.seed = options.seed;
    config.workers = options.workers;
    if (!options.taxonomy_file.empty()) {
        table_storage = std::make_unique<FeatureTable>(
            load_feature_table_file(options.taxonomy_file));
        for (const auto& warning : table_storage->warnings()) {
            std::cerr << "taxonomy warning: " << warning << "\n";
        }
        config.taxonomy = table_storage.get();
    }
    return config;
}

void print_report_summary(const RunReport& report) {
    std::cout << "dataset: " << report.dataset_name << "\n"
              << "items:   " << report.total << " (failed " << report.failed << ", unparseable "
              << report.unparseable << ")\n"
              << "correct: " << report.correct << "\n"
              << "accuracy: " << report.accuracy() << "\n"
              << "tokens:  " << report.usage.total_tokens << "\n";
}

void print_complexity(const ComplexityReport& report) {
    std::cout << "score: " << report.score << " (clauses " << report.n_clause << ", deps "
              << report.n_dep << ", rarity " << report.rarity << ", diversity "
              << report.diversity << ")\n"
              << "branch: " << (report.needs_reasoning ? "deep" : "direct") << "\n";
}

int cmd_route(const std::string& question, const std::string& tokens_path,
              const PipelineOptions& options) {
    std::unique_ptr<FeatureTable> storage;
    const PipelineConfig config = make_pipeline_config(options, storage);
    if (!tokens_path.empty()) {
        // pre-parsed dependency annotations always go through the scorer
        print_complexity(complexity_score(load_token_file(tokens_path), config.complexity));
        return 0;
    }
    if (config.router == RouterKind::Complexity) {
        print_complexity(complexity_score(fallback_annotate(question), config.complexity));
        return 0;
    }
    const RoutingDecision decision = route(question, config.feature_table());
    std::cout << "category: " << category_name(decision.category) << "\n";
    std::cout << "branch: " << branch_name(decision.branch) << "\n";
    std::cout << "hits:";
    for (int i = 0; i < kCategoryCount; ++i) {
        if (decision.hits[static_cast<size_t>(i)] == 0) continue;
        std::cout << " " << category_name(static_cast<QuestionCategory>(i)) << "="
                  << decision.hits[static_cast<size_t>(i)];
    }
    std::cout << "\n";
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"training-free inference orchestrator for multimodal multiple-choice QA"};
    app.require_subcommand(1);
    app.set_config("--config");

    // route
    auto* route_cmd = app.add_subcommand("route", "classify a question and show its branch");
    std::string question;
    std::string tokens_path;
    PipelineOptions route_options;
    route_cmd->add_option("--question", question, "question text");
    route_cmd->add_option("--tokens", tokens_path,
                          "pre-parsed token file (index, text, pos, head, dep) scored instead "
                          "of the raw question");
    add_pipeline_options(route_cmd, route_options);

    // run / eval
    auto* run_cmd = app.add_subcommand("run", "run a dataset and write per-item traces");
    auto* eval_cmd = app.add_subcommand("eval", "run a dataset and emit an accuracy report");
    std::string dataset_path;
    std::string out_dir;
    std::string baseline_path;
    std::string format = "json";
    bool resume = false;
    BackendOptions run_backend;
    PipelineOptions run_pipeline;
    for (CLI::App* cmd : {run_cmd, eval_cmd}) {
        cmd->add_option("--dataset", dataset_path, "JSON-lines dataset")->required();
        cmd->add_option("--out", out_dir, "output directory (config, journal, report)");
        add_backend_options(cmd, run_backend);
        add_pipeline_options(cmd, run_pipeline);
    }
    eval_cmd->add_flag("--resume", resume, "replay completed items from the journal");
    eval_cmd->add_option("--baseline", baseline_path, "baseline report.json for delta columns");
    eval_cmd->add_option("--format", format, "json | md | csv");

    // sweep
    auto* sweep_cmd = app.add_subcommand("sweep", "rerun the dataset across sample counts");
    std::vector<int> sweep_samples{1, 3, 5, 7};
    BackendOptions sweep_backend;
    PipelineOptions sweep_pipeline;
    std::string sweep_out;
    sweep_cmd->add_option("--dataset", dataset_path, "JSON-lines dataset")->required();
    sweep_cmd->add_option("--samples", sweep_samples, "sample counts to sweep")->delimiter(',');
    sweep_cmd->add_option("--out", sweep_out, "directory receiving sweep.csv");
    add_backend_options(sweep_cmd, sweep_backend);
    add_pipeline_options(sweep_cmd, sweep_pipeline, /*with_samples=*/false);

    // pilot
    auto* pilot_cmd = app.add_subcommand("pilot", "probe tasks and blind consistency test");
    std::string chains_path;
    std::string choices_path;
    int resolution = 384;
    BackendOptions pilot_backend;
    pilot_cmd->add_option("--chains", chains_path, "probe chains (JSON-lines)")->required();
    pilot_cmd->add_option("--dataset", dataset_path, "items referenced by the chains")->required();
    pilot_cmd->add_option("--original-choices", choices_path,
                          "JSON map item_id -> originally chosen letter (enables the blind test)");
    pilot_cmd->add_option("--resolution", resolution, "black frame edge length");
    pilot_cmd->add_option("--out", out_dir, "output directory");
    add_backend_options(pilot_cmd, pilot_backend);

    // probe-prompt: fill the offline fact-extraction template for an item
    auto* prompt_cmd = app.add_subcommand(
        "probe-prompt", "print the chain-generation prompt for an item (generation is offline)");
    std::string prompt_item_id;
    prompt_cmd->add_option("--dataset", dataset_path, "JSON-lines dataset")->required();
    prompt_cmd->add_option("--id", prompt_item_id, "item id")->required();

    // fingerprint (fixture authoring aid)
    auto* fp_cmd = app.add_subcommand("fingerprint",
                                      "print transcript fingerprints for mock fixture rules");
    std::string fp_stage = "standard";
    std::string fp_item_id;
    std::string fp_summary = "summary";
    std::string fp_reasoning = "reasoning";
    fp_cmd->add_option("--dataset", dataset_path, "JSON-lines dataset")->required();
    fp_cmd->add_option("--id", fp_item_id, "item id (default: all items)");
    fp_cmd->add_option("--stage", fp_stage, "standard | anchoring | deduction | refinement");
    fp_cmd->add_option("--summary", fp_summary, "summary text used by deduction/refinement");
    fp_cmd->add_option("--reasoning", fp_reasoning, "reasoning text used by refinement");

    CLI11_PARSE(app, argc, argv);

    try {
        if (route_cmd->parsed()) {
            if (question.empty() && tokens_path.empty()) {
                throw VistaError("route needs --question or --tokens");
            }
            return cmd_route(question, tokens_path, route_options);
        }
        if (run_cmd->parsed() || eval_cmd->parsed()) {
            const Dataset dataset = load_dataset(dataset_path);
            auto backend = make_backend(run_backend);
            std::unique_ptr<FeatureTable> storage;
            const PipelineConfig config = make_pipeline_config(run_pipeline, storage);
            EvalOptions eval_options;
            eval_options.out_dir = out_dir;
            eval_options.resume = resume;
            const RunReport report = run_eval(dataset, config, *backend, eval_options);
            if (eval_cmd->parsed()) {
                std::unique_ptr<RunReport> baseline;
                if (!baseline_path.empty()) {
                    baseline = std::make_unique<RunReport>(run_report_from_json(
                        nlohmann::json::parse(read_file(baseline_path))));
                }
                const std::string rendered =
                    emit_report(report, parse_report_format(format), baseline.get());
                std::cout << rendered;
                if (!out_dir.empty() && format != "json") {
                    const std::string ext = format == "csv" ? "csv" : "md";
                    write_file((fs::path(out_dir) / ("report." + ext)).string(), rendered);
                }
            } else {
                print_report_summary(report);
            }
            return 0;
        }
        if (sweep_cmd->parsed()) {
            const Dataset dataset = load_dataset(dataset_path);
            auto backend = make_backend(sweep_backend);
            std::unique_ptr<FeatureTable> storage;
            const PipelineConfig config = make_pipeline_config(sweep_pipeline, storage);
            const auto rows = run_sample_sweep(dataset, config, *backend, sweep_samples);
            const std::string csv = sweep_csv(rows);
            std::cout << csv;
            if (!sweep_out.empty()) {
                fs::create_directories(sweep_out);
                write_file((fs::path(sweep_out) / "sweep.csv").string(), csv);
            }
            return 0;
        }
        if (prompt_cmd->parsed()) {
            const Dataset dataset = load_dataset(dataset_path);
            for (const auto& item : dataset.items) {
                if (item.id == prompt_item_id) {
                    std::cout << fact_extraction_prompt(item);
                    return 0;
                }
            }
            throw VistaError("no item with id '" + prompt_item_id + "'");
        }
        if (pilot_cmd->parsed()) {
            const Dataset dataset = load_dataset(dataset_path);
            const auto chains = load_probe_chains(chains_path);
            auto backend = make_backend(pilot_backend);
            const ProbeTaskResult tasks = run_probe_tasks(chains, dataset.items, *backend);
            std::cout << "task A accuracy: " << tasks.acc_a() << " (" << tasks.a_correct << "/"
                      << tasks.a_total << ")\n"
                      << "task B accuracy: " << tasks.acc_b() << " (" << tasks.b_correct << "/"
                      << tasks.b_total << ")\n"
                      << "task C accuracy: " << tasks.acc_c() << " (" << tasks.c_correct << "/"
                      << tasks.c_total << ")\n";
            nlohmann::json pilot_report;
            pilot_report["tasks"] = {{"a_correct", tasks.a_correct}, {"a_total", tasks.a_total},
                                     {"b_correct", tasks.b_correct}, {"b_total", tasks.b_total},
                                     {"c_correct", tasks.c_correct}, {"c_total", tasks.c_total},
                                     {"acc_a", tasks.acc_a()},       {"acc_b", tasks.acc_b()},
                                     {"acc_c", tasks.acc_c()}};
            if (!choices_path.empty()) {
                const auto doc = nlohmann::json::parse(read_file(choices_path));
                std::map<std::string, char> choices;
                for (const auto& [id, letter] : doc.items()) {
                    choices[id] = letter.get<std::string>().at(0);
                }
                std::vector<MCQItem> chosen;
                for (const auto& item : dataset.items) {
                    if (choices.count(item.id)) chosen.push_back(item);
                }
                BlindConsistencyOptions blind_options;
                blind_options.resolution = resolution;
                if (!out_dir.empty()) blind_options.work_dir = out_dir;
                const BlindConsistencyReport blind =
                    run_blind_consistency(chosen, choices, *backend, blind_options);
                std::cout << "blind consistency: " << blind.consistency_rate << " ("
                          << blind.matches << "/" << blind.n << ", excluded " << blind.excluded
                          << ")\n"
                          << "chi-square: " << blind.chi_square
                          << (blind.p_below_001 ? " (p < 0.001)" : " (not significant)") << "\n";
                if (blind.low_expected_warning) {
                    std::cout << "warning: expected cell below 5, statistic unreliable\n";
                }
                pilot_report["blind"] = {{"n", blind.n},
                                         {"matches", blind.matches},
                                         {"excluded", blind.excluded},
                                         {"consistency_rate", blind.consistency_rate},
                                         {"chi_square", blind.chi_square},
                                         {"p_below_001", blind.p_below_001},
                                         {"low_expected_warning", blind.low_expected_warning}};
            }
            if (!out_dir.empty()) {
                fs::create_directories(out_dir);
                write_file((fs::path(out_dir) / "pilot_report.json").string(),
                           pilot_report.dump(2) + "\n");
            }
            return 0;
        }
        if (fp_cmd->parsed()) {
            const Dataset dataset = load_dataset(dataset_path);
            for (const auto& item : dataset.items) {
                if (!fp_item_id.empty() && item.id != fp_item_id) continue;
                ChatTranscript transcript;
                if (fp_stage == "standard") {
                    transcript = render_standard(item);
                } else if (fp_stage == "anchoring") {
                    transcript = render_anchoring(item);
                } else if (fp_stage == "deduction") {
                    transcript = render_deduction(item, fp_summary);
                } else if (fp_stage == "refinement") {
                    transcript = render_refinement(item, fp_summary, fp_reasoning);
                } else {
                    throw VistaError("unknown stage '" + fp_stage + "'");
                }
                std::cout << item.id << " " << fp_stage << " " << fingerprint(transcript) << "\n";
            }
            return 0;
        }
    } catch (const std::exception& ex) {
        std::cerr << "error: " << ex.what() << "\n";
        return 1;
    }
    return 0;
}
