// snapsim: simulated spear-phishing campaign toolkit.
//
// Everything here runs against the built-in social-network simulator; there
// are no live connectors. See README.md for the full workflow.

#include <cstdlib>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "snapsim/campaign.hpp"
#include "snapsim/corpus.hpp"
#include "snapsim/embeddings.hpp"
#include "snapsim/linktrack.hpp"
#include "snapsim/lstm.hpp"
#include "snapsim/simnet.hpp"
#include "snapsim/textgen.hpp"
#include "snapsim/topics.hpp"
#include "snapsim/triage.hpp"

namespace {

using namespace snapsim;

std::uint64_t effective_seed(std::uint64_t cli_seed) {
    if (const char* env = std::getenv("SNAPSIM_SEED")) {
        try {
            return std::stoull(env);
        } catch (const std::exception&) {
            throw ConfigError("SNAPSIM_SEED is not a valid integer: " + std::string(env));
        }
    }
    return cli_seed;
}

ReferenceLexicon load_lexicon(const std::string& data_dir) {
    return ReferenceLexicon::load(data_dir + "/stopwords.txt", data_dir + "/reffreq.tsv");
}

ClassifyRules load_rules(const std::string& data_dir) {
    return ClassifyRules::load(data_dir + "/crawler_agents.txt",
                               data_dir + "/crawler_countries.txt");
}

std::vector<FeatureVector> corpus_features(const Corpus& corpus) {
    std::vector<FeatureVector> features;
    const std::int64_t ref = corpus.reference_time();
    for (const auto& u : corpus.users())
        features.push_back(extract_features(u, corpus.timeline(u.user_id), ref));
    return features;
}

int cmd_ingest(const std::string& users_path, const std::string& posts_path,
               const std::string& out_path) {
    auto users = load_users(users_path);
    auto posts = load_posts(posts_path);
    Corpus corpus = Corpus::build(std::move(users), std::move(posts));
    corpus.save(out_path);
    std::cout << "ingested " << corpus.users().size() << " users, " << corpus.posts().size()
              << " posts -> " << out_path << "\n";
    return 0;
}

int cmd_triage(const std::string& corpus_path, int k, int trials, std::uint64_t seed,
               const std::string& out_path) {
    Corpus corpus = Corpus::load(corpus_path);
    auto features = corpus_features(corpus);
    auto standardized = standardize(features);
    std::uint64_t fit_seed = seed;
    double search_silhouette = 0;
    if (trials > 0) {
        SearchResult found = hyperparameter_search(standardized, trials, seed);
        k = found.k;
        fit_seed = found.seed;
        search_silhouette = found.silhouette;
        std::cout << "search selected k=" << k << " (silhouette " << search_silhouette
                  << ")\n";
    }
    ClusterModel model = kmeans_fit(standardized, k, fit_seed);
    TriageResult result = select_target_cluster(model, features);
    std::ofstream out(out_path);
    if (!out) throw Error("cannot write " + out_path);
    out << triage_to_json(result).dump() << '\n';
    std::cout << "selected cluster " << result.selected_cluster << " with "
              << result.ranked_targets.size() << " targets (silhouette " << result.silhouette
              << ") -> " << out_path << "\n";
    return 0;
}

int cmd_train_lstm(const std::string& corpus_path, const std::string& embeddings_path,
                   int epochs, std::uint64_t seed, int hidden, double lr,
                   const std::string& out_path) {
    Corpus corpus = Corpus::load(corpus_path);
    EmbeddingTable table = load_embeddings(embeddings_path);
    std::vector<Timeline> timelines;
    for (const auto& u : corpus.users()) timelines.push_back(corpus.timeline(u.user_id));
    TrainConfig cfg;
    cfg.epochs = epochs;
    cfg.seed = seed;
    cfg.hidden_size = hidden;
    cfg.learning_rate = lr;
    LstmModel model = train_lstm(timelines, table, cfg);
    model.save(out_path);
    std::cout << "trained |V|=" << model.vocab_size() << " d=" << model.embed_dim
              << " h=" << model.hidden_size << "; loss " << model.initial_loss << " -> "
              << model.final_loss << "; saved " << out_path << "\n";
    return 0;
}

int cmd_generate(const std::string& model_path, const std::string& corpus_path,
                 const std::string& user_id, double temperature, std::uint64_t seed,
                 std::size_t threshold, const std::string& data_dir) {
    Corpus corpus = Corpus::load(corpus_path);
    const UserProfile& profile = corpus.user(user_id);
    const Timeline& timeline = corpus.timeline(user_id);
    ReferenceLexicon lexicon = load_lexicon(data_dir);

    SeedTopics seeds;
    try {
        seeds = extract_seed(timeline, lexicon, 2);
    } catch (const NoTopic&) {
    }
    GenerationConfig gen;
    gen.temperature = temperature;
    gen.rng_seed = combine_seed(seed, fnv1a64(user_id));

    ModelChoice choice = select_model(profile, timeline, threshold);
    if (seeds.empty()) choice = ModelChoice::hmm;
    std::string text;
    if (choice == ModelChoice::lstm) {
        LstmModel model = LstmModel::load(model_path);
        text = generate(model, seeds, gen);
    } else {
        HmmModel hmm = train_hmm(timeline, 1);
        text = generate(hmm, seeds, gen);
    }
    std::cout << text << "\n";
    return 0;
}

int cmd_run(const std::string& corpus_path, const std::string& model_path,
            const std::string& simconfig_path, std::int64_t duration, bool schedule,
            std::uint64_t seed, const std::string& out_path, const std::string& data_dir,
            std::optional<int> rate_limit, bool scrambled, int trials,
            const std::string& events_path) {
    Corpus corpus = Corpus::load(corpus_path);
    ReferenceLexicon lexicon = load_lexicon(data_dir);
    SimConfig sim_config =
        simconfig_path.empty() ? SimConfig{} : SimConfig::load(simconfig_path);
    sim_config.rng_seed = combine_seed(seed, 0x51);
    if (rate_limit) sim_config.rate_limit = *rate_limit;

    LinkStore links(combine_seed(seed, 0x11), events_path);
    SocialSim sim(corpus, lexicon, sim_config, links);

    std::optional<LstmModel> model;
    if (!model_path.empty()) model = LstmModel::load(model_path);

    CampaignConfig cfg;
    cfg.duration = duration;
    cfg.scheduling_enabled = schedule;
    cfg.rng_seed = seed;
    cfg.scrambled_text = scrambled;
    cfg.triage_trials = trials;
    CampaignLog log = run_campaign(corpus, sim, lexicon, model ? &*model : nullptr, cfg);
    log.save(out_path);
    std::cout << "campaign complete: " << log.posts_sent << " posts, " << log.clicks.size()
              << " clicks -> " << out_path << "\n";
    return 0;
}

int cmd_report(const std::string& log_path, const std::string& format,
               const std::string& data_dir) {
    CampaignLog log = CampaignLog::load(log_path);
    ClassifyRules rules = load_rules(data_dir);
    CampaignReport rep = report(log, rules);
    if (format == "json")
        std::cout << rep.to_json().dump(2) << "\n";
    else
        std::cout << rep.to_table();
    return 0;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"snapsim: simulated spear-phishing pipeline (simulator only)"};
    app.require_subcommand(1);
    std::string data_dir = "data";
    app.add_option("--data-dir", data_dir, "directory with lexicon and crawler lists")
        ->capture_default_str();

    auto* ingest = app.add_subcommand("ingest", "build corpus.db from JSONL inputs");
    std::string users_path, posts_path, ingest_out = "corpus.db";
    ingest->add_option("--users", users_path, "users.jsonl")->required();
    ingest->add_option("--posts", posts_path, "posts.jsonl")->required();
    ingest->add_option("--out", ingest_out, "output corpus")->capture_default_str();

    auto* triage = app.add_subcommand("triage", "cluster users and rank targets");
    std::string triage_corpus, triage_out = "triage.json";
    int triage_k = 3, triage_trials = 0;
    std::uint64_t triage_seed = 7;
    triage->add_option("--corpus", triage_corpus)->required();
    triage->add_option("--k", triage_k, "cluster count when --trials is 0")
        ->capture_default_str();
    triage->add_option("--trials", triage_trials, "randomized search trials (0 = fixed k)")
        ->capture_default_str();
    triage->add_option("--seed", triage_seed)->capture_default_str();
    triage->add_option("--out", triage_out)->capture_default_str();

    auto* train = app.add_subcommand("train-lstm", "train the shared word-level LSTM");
    std::string train_corpus, train_embeddings, train_out = "model.bin";
    int train_epochs = 30, train_hidden = 128;
    double train_lr = 1e-3;
    std::uint64_t train_seed = 7;
    train->add_option("--corpus", train_corpus)->required();
    train->add_option("--embeddings", train_embeddings, "GloVe-style text file")->required();
    train->add_option("--epochs", train_epochs)->capture_default_str();
    train->add_option("--hidden", train_hidden)->capture_default_str();
    train->add_option("--lr", train_lr)->capture_default_str();
    train->add_option("--seed", train_seed)->capture_default_str();
    train->add_option("--out", train_out)->capture_default_str();

    auto* gen = app.add_subcommand("generate", "generate one post body for a user");
    std::string gen_model, gen_corpus, gen_user;
    double gen_temperature = 0.7;
    std::uint64_t gen_seed = 7;
    std::size_t gen_threshold = 200;
    gen->add_option("--model", gen_model, "LSTM checkpoint")->required();
    gen->add_option("--corpus", gen_corpus)->required();
    gen->add_option("--user", gen_user)->required();
    gen->add_option("--temperature", gen_temperature)->capture_default_str();
    gen->add_option("--seed", gen_seed)->capture_default_str();
    gen->add_option("--threshold", gen_threshold, "HMM post-count threshold")
        ->capture_default_str();

    auto* run = app.add_subcommand("run", "run a full campaign against the simulator");
    std::string run_corpus, run_model, run_simconfig, run_out = "campaign.log";
    std::string run_events;
    std::int64_t run_duration = 7200;
    bool run_schedule = false, run_scrambled = false;
    std::uint64_t run_seed = 7;
    int run_trials = 0;
    std::optional<int> run_rate_limit;
    run->add_option("--corpus", run_corpus)->required();
    run->add_option("--model", run_model, "LSTM checkpoint (optional; HMM-only without)");
    run->add_option("--simconfig", run_simconfig, "simulator config JSON");
    run->add_option("--duration", run_duration, "posting window, sim seconds")
        ->capture_default_str();
    run->add_flag("--schedule", run_schedule, "post at each target's peak hour");
    run->add_flag("--scrambled", run_scrambled, "ablation: random token bodies");
    run->add_option("--seed", run_seed)->capture_default_str();
    run->add_option("--trials", run_trials, "triage search trials (0 = fixed k=3)")
        ->capture_default_str();
    int run_rate_limit_value = 0;
    auto* rl_opt = run->add_option("--rate-limit", run_rate_limit_value,
                                   "override sim posts per 15-minute window");
    run->add_option("--out", run_out)->capture_default_str();
    run->add_option("--events", run_events, "also append raw click events to this JSONL file");

    auto* rep = app.add_subcommand("report", "summarize a campaign log");
    std::string rep_log, rep_format = "table";
    rep->add_option("--log", rep_log)->required();
    rep->add_option("--format", rep_format, "json|table")
        ->check(CLI::IsMember({"json", "table"}))
        ->capture_default_str();

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return 1; // usage error
    }

    try {
        if (*ingest) return cmd_ingest(users_path, posts_path, ingest_out);
        if (*triage)
            return cmd_triage(triage_corpus, triage_k, triage_trials,
                              effective_seed(triage_seed), triage_out);
        if (*train)
            return cmd_train_lstm(train_corpus, train_embeddings, train_epochs,
                                  effective_seed(train_seed), train_hidden, train_lr,
                                  train_out);
        if (*gen)
            return cmd_generate(gen_model, gen_corpus, gen_user, gen_temperature,
                                effective_seed(gen_seed), gen_threshold, data_dir);
        if (*run) {
            if (rl_opt->count()) run_rate_limit = run_rate_limit_value;
            return cmd_run(run_corpus, run_model, run_simconfig, run_duration, run_schedule,
                           effective_seed(run_seed), run_out, data_dir, run_rate_limit,
                           run_scrambled, run_trials, run_events);
        }
        if (*rep) return cmd_report(rep_log, rep_format, data_dir);
        return 1;
    } catch (const snapsim::Error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "internal error: " << e.what() << "\n";
        return 3;
    }
}
