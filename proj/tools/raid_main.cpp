// Command-line workbench: ingest -> train -> attack -> eval -> report.
// Exit codes: 0 success, 2 usage or input error, 3 numerical abort.

#include <charconv>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "raid/attack.hpp"
#include "raid/data.hpp"
#include "raid/errors.hpp"
#include "raid/eval.hpp"
#include "raid/model.hpp"
#include "raid/report.hpp"
#include "raid/train.hpp"

namespace {

// Shortest round-trip formatting keeps every artifact byte-stable.
std::string fmt_double(double v) {
  char buf[32];
  const auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

void write_file(const std::string& path, const std::string& content) {
  const std::filesystem::path p(path);
  if (p.has_parent_path()) std::filesystem::create_directories(p.parent_path());
  std::ofstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("cannot open " + path + " for writing");
  f << content;
  if (!f) throw std::runtime_error("write failed for " + path);
}

std::string read_file_or_empty(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) return {};
  return std::string(std::istreambuf_iterator<char>(f),
                     std::istreambuf_iterator<char>());
}

struct IngestArgs {
  std::string ratings;
  std::string users;
  std::string format = "dat";
  std::string scheme = "gender";
  int kcore_user = 5;
  int kcore_item = 5;
  std::string out;
  std::uint64_t seed = 42;
};

void run_ingest(const IngestArgs& a) {
  const auto format = a.format == "csv" ? raid::data::RatingsFormat::csv
                                        : raid::data::RatingsFormat::movielens_dat;
  raid::data::RawRatings raw = raid::data::parse_ratings(a.ratings, format);
  raw = raid::data::filter_kcore(raw, a.kcore_user, a.kcore_item);
  raid::data::Dataset ds = raid::data::build_splits(raw, a.seed);
  ds.kcore_user = a.kcore_user;
  ds.kcore_item = a.kcore_item;

  raid::data::LabelSummary labels;
  if (!a.users.empty()) {
    const raid::data::AttributeTable attrs = raid::data::parse_users(a.users);
    const auto scheme = a.scheme == "age" ? raid::data::BinScheme::age3
                                          : raid::data::BinScheme::gender2;
    labels = raid::data::label_users(ds, attrs, scheme);
  }
  raid::data::save_dataset(ds, a.out);
  std::cout << "ingested " << ds.num_users() << " users, " << ds.num_items()
            << " items, " << ds.train.size() << " train + " << ds.heldout.size()
            << " heldout interactions";
  if (!a.users.empty()) {
    std::cout << "; labeled " << labels.labeled << " users (" << labels.missing
              << " missing, " << labels.unknown_token << " unreadable)";
  }
  std::cout << "\n";
}

struct TrainArgs {
  std::string data;
  std::string out;
  std::string defense = "none";
  int dim = 32;
  double mu = 1e-4;
  double eta = 1.0;
  double tau = 1.0;
  int xi = 4;
  double sigma = 0.0;
  int epochs_warm = 5;
  int epochs_defense = 15;
  int neg_ratio = 4;
  int support_size = 512;
  std::string support = "subsample";
  double mu_defense = 0.0;
  std::uint64_t seed = 42;
};

void run_train(const TrainArgs& a) {
  if (a.defense == "dp" && a.sigma <= 0.0) {
    throw std::invalid_argument("--defense dp needs --sigma > 0");
  }
  const raid::data::Dataset ds = raid::data::load_dataset(a.data);

  raid::rec::TrainConfig cfg;
  cfg.dim = a.dim;
  cfg.mu = a.mu;
  cfg.eta = a.defense == "raid" ? a.eta : 0.0;
  cfg.tau = a.tau;
  cfg.refresh_every = a.xi;
  cfg.epochs_warm = a.epochs_warm;
  cfg.epochs_defense = a.epochs_defense;
  cfg.neg_ratio = a.neg_ratio;
  cfg.support_size = a.support_size;
  cfg.support = a.support == "kmeans" ? raid::bary::SupportStrategy::kmeans
                                      : raid::bary::SupportStrategy::subsample;
  cfg.mu_defense = a.mu_defense;
  cfg.seed = a.seed;  // global seed + 0
  cfg.validate();

  raid::rec::TrainResult result = raid::rec::train_raid(
      ds.train, ds.num_users(), ds.num_items(), ds.labels, cfg);
  const double sigma_applied = a.defense == "dp" ? a.sigma : 0.0;
  if (sigma_applied > 0.0) {
    result.model = raid::rec::perturb_users(result.model, sigma_applied, cfg.seed);
  }

  // Everything the run computed from, resolved. Modes that compute the same
  // thing (raid with eta 0, none) serialize identically on purpose.
  nlohmann::json cj;
  cj["dim"] = cfg.dim;
  cj["mu"] = cfg.mu;
  cj["eta"] = cfg.eta;
  cj["tau"] = cfg.tau;
  cj["xi"] = cfg.refresh_every;
  cj["epochs_warm"] = cfg.epochs_warm;
  cj["epochs_defense"] = cfg.epochs_defense;
  cj["neg_ratio"] = cfg.neg_ratio;
  cj["support_size"] = cfg.support_size;
  cj["support"] = a.support;
  cj["mu_defense"] = cfg.mu_defense;
  cj["sigma"] = sigma_applied;
  cj["seed"] = cfg.seed;

  std::filesystem::create_directories(a.out);
  raid::rec::save_model(result.model, a.out + "/checkpoint.txt", cj.dump());

  std::string log = "epoch,defense_active,refreshed,ce,defense,dual_value\n";
  for (const auto& e : result.log.epochs) {
    log += std::to_string(e.epoch) + "," + (e.defense_active ? "1" : "0") + "," +
           (e.refreshed ? "1" : "0") + "," + fmt_double(e.ce) + "," +
           fmt_double(e.defense) + "," + fmt_double(e.dual_value) + "\n";
  }
  write_file(a.out + "/train_log.csv", log);

  nlohmann::json audit = cj;
  audit["defense"] = a.defense;
  audit["data"] = a.data;
  write_file(a.out + "/train_config.json", audit.dump(2) + "\n");

  const auto& last = result.log.epochs.back();
  std::cout << "trained " << result.log.epochs.size() << " epochs; final ce "
            << last.ce << ", defense " << last.defense;
  if (result.log.defense_disabled_no_labels) {
    std::cout << " (defense requested but no labels present)";
  }
  std::cout << "\n";
}

struct AttackArgs {
  std::string data;
  std::string checkpoint;
  std::string out = "attack.json";
  std::string classifier = "logreg";
  std::vector<int> hidden = {100};
  double l2 = 1.0;
  double lr = 1e-3;
  int iters = 500;
  std::uint64_t seed = 42;
};

void run_attack(const AttackArgs& a) {
  const raid::data::Dataset ds = raid::data::load_dataset(a.data);
  const raid::rec::LoadedModel loaded = raid::rec::load_model(a.checkpoint);
  if (loaded.model.num_users() != ds.num_users()) {
    throw std::invalid_argument("checkpoint and dataset disagree on user count");
  }

  raid::attack::ClassifierConfig cfg;
  cfg.kind = a.classifier == "mlp" ? raid::attack::ClassifierKind::mlp
                                   : raid::attack::ClassifierKind::logreg;
  cfg.hidden_dims = a.hidden;
  cfg.l2_weight = a.l2;
  cfg.learning_rate = a.lr;
  cfg.max_iter = a.iters;
  cfg.seed = a.seed + 1;  // global seed + 1
  const raid::attack::AttackReport report =
      raid::attack::evaluate_attack(loaded.model.user_vecs, ds.labels, cfg);

  nlohmann::json artifact;
  artifact["command"] = "attack";
  artifact["config"]["classifier"] = a.classifier;
  artifact["config"]["hidden"] = a.hidden;
  artifact["config"]["l2"] = a.l2;
  artifact["config"]["lr"] = a.lr;
  artifact["config"]["iters"] = a.iters;
  artifact["config"]["seed"] = a.seed;
  artifact["config"]["seed_effective"] = cfg.seed;
  artifact["config"]["data"] = a.data;
  artifact["config"]["checkpoint"] = a.checkpoint;
  artifact["report"] = nlohmann::json::parse(report.to_json());
  write_file(a.out, artifact.dump(2) + "\n");
  std::cout << "attack f1_micro " << report.f1_micro << ", bacc " << report.bacc
            << "\n";
}

struct EvalArgs {
  std::string data;
  std::string checkpoint;
  std::string out = "rec.json";
  std::vector<int> cutoffs = {5, 10, 15, 20};
  std::uint64_t seed = 42;
};

void run_eval(const EvalArgs& a) {
  const raid::data::Dataset ds = raid::data::load_dataset(a.data);
  const raid::rec::LoadedModel loaded = raid::rec::load_model(a.checkpoint);
  if (loaded.model.num_users() != ds.num_users() ||
      loaded.model.num_items() != ds.num_items()) {
    throw std::invalid_argument("checkpoint and dataset disagree on shape");
  }

  // Candidates are every item the user did not train on; val and heldout
  // interactions stay in the candidate pool.
  std::vector<std::vector<int>> train_items(
      static_cast<std::size_t>(ds.num_users()));
  for (const auto& x : ds.train) {
    train_items[static_cast<std::size_t>(x.user)].push_back(x.item);
  }
  std::vector<raid::eval::UserCase> cases;
  for (int u = 0; u < ds.num_users(); ++u) {
    raid::eval::UserCase c;
    c.user = u;
    c.test_item = ds.test_item[static_cast<std::size_t>(u)];
    c.excluded = train_items[static_cast<std::size_t>(u)];
    cases.push_back(std::move(c));
  }
  const raid::eval::RecReport report =
      raid::eval::evaluate_model(loaded.model, cases, a.cutoffs);

  nlohmann::json artifact;
  artifact["command"] = "eval";
  artifact["config"]["cutoffs"] = a.cutoffs;
  artifact["config"]["seed"] = a.seed;
  artifact["config"]["seed_effective"] = a.seed + 2;  // recorded for the audit trail
  artifact["config"]["data"] = a.data;
  artifact["config"]["checkpoint"] = a.checkpoint;
  artifact["report"] = nlohmann::json::parse(report.to_json());
  write_file(a.out, artifact.dump(2) + "\n");
  std::cout << "eval over " << report.num_users << " users";
  for (const int k : a.cutoffs) {
    std::cout << "; hr@" << k << " " << report.hr.at(k) << ", ndcg@" << k << " "
              << report.ndcg.at(k);
  }
  std::cout << "\n";
}

struct ReportArgs {
  std::vector<std::string> runs;  // name=dir
  std::string out_csv = "report.csv";
  std::string out_md = "report.md";
};

// Pulls the report payload back out of an artifact wrapper.
std::string unwrap_report(const std::string& artifact_json) {
  if (artifact_json.empty()) return {};
  const nlohmann::json j = nlohmann::json::parse(artifact_json);
  return j.at("report").dump();
}

void run_report(const ReportArgs& a) {
  std::vector<raid::report::MethodRow> rows;
  for (const std::string& spec : a.runs) {
    const std::size_t eq = spec.find('=');
    if (eq == std::string::npos || eq == 0 || eq + 1 == spec.size()) {
      throw std::invalid_argument("--run expects name=dir, got " + spec);
    }
    const std::string name = spec.substr(0, eq);
    const std::string dir = spec.substr(eq + 1);
    const std::string attack = unwrap_report(read_file_or_empty(dir + "/attack.json"));
    const std::string rec = unwrap_report(read_file_or_empty(dir + "/rec.json"));
    if (attack.empty() && rec.empty()) {
      throw std::invalid_argument("no attack.json or rec.json under " + dir);
    }
    rows.push_back(raid::report::parse_run(name, attack, rec));
  }
  const raid::report::CombinedTable table = raid::report::combine(std::move(rows));
  write_file(a.out_csv, table.to_csv());
  write_file(a.out_md, table.to_markdown());
  std::cout << table.to_markdown();
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Wasserstein-barycenter defense workbench for implicit-feedback recommenders"};
  app.require_subcommand(1);

  IngestArgs ingest;
  CLI::App* ci = app.add_subcommand("ingest", "Index raw ratings into a dataset directory");
  ci->add_option("--ratings", ingest.ratings, "Ratings file")
      ->required()
      ->check(CLI::ExistingFile);
  ci->add_option("--users", ingest.users, "User attribute file")
      ->check(CLI::ExistingFile);
  ci->add_option("--format", ingest.format, "Ratings layout")
      ->check(CLI::IsMember({"dat", "csv"}));
  ci->add_option("--scheme", ingest.scheme, "Attribute binning")
      ->check(CLI::IsMember({"gender", "age"}));
  ci->add_option("--kcore-user", ingest.kcore_user, "Minimum interactions per user");
  ci->add_option("--kcore-item", ingest.kcore_item, "Minimum interactions per item");
  ci->add_option("--out", ingest.out, "Output dataset directory")->required();
  ci->add_option("--seed", ingest.seed, "Split seed");
  ci->callback([&] { run_ingest(ingest); });

  TrainArgs train;
  CLI::App* ct = app.add_subcommand("train", "Fit embeddings, optionally with a defense");
  ct->add_option("--data", train.data, "Dataset directory")->required();
  ct->add_option("--out", train.out, "Run output directory")->required();
  ct->add_option("--defense", train.defense, "Defense mode")
      ->check(CLI::IsMember({"none", "raid", "dp"}));
  ct->add_option("--dim", train.dim, "Embedding dimension");
  ct->add_option("--mu", train.mu, "Rating-loss step size");
  ct->add_option("--eta", train.eta, "Defense weight");
  ct->add_option("--tau", train.tau, "Barycenter entropy penalty");
  ct->add_option("--xi", train.xi, "Epochs between barycenter refreshes");
  ct->add_option("--sigma", train.sigma, "Gaussian noise scale for dp");
  ct->add_option("--epochs-warm", train.epochs_warm, "Rating-only epochs");
  ct->add_option("--epochs-defense", train.epochs_defense, "Defended epochs");
  ct->add_option("--neg-ratio", train.neg_ratio, "Negatives per positive");
  ct->add_option("--support-size", train.support_size, "Barycenter support atoms");
  ct->add_option("--support", train.support, "Support selection")
      ->check(CLI::IsMember({"subsample", "kmeans"}));
  ct->add_option("--mu-defense", train.mu_defense, "Defense step (0 = mu x batch)");
  ct->add_option("--seed", train.seed, "Global seed");
  ct->callback([&] { run_train(train); });

  AttackArgs attack;
  CLI::App* ca = app.add_subcommand("attack", "Infer user attributes from a checkpoint");
  ca->add_option("--data", attack.data, "Dataset directory")->required();
  ca->add_option("--checkpoint", attack.checkpoint, "Model checkpoint")
      ->required()
      ->check(CLI::ExistingFile);
  ca->add_option("--out", attack.out, "Report path");
  ca->add_option("--classifier", attack.classifier, "Attack model")
      ->check(CLI::IsMember({"logreg", "mlp"}));
  ca->add_option("--hidden", attack.hidden, "MLP hidden sizes");
  ca->add_option("--l2", attack.l2, "Weight penalty");
  ca->add_option("--lr", attack.lr, "Initial learning rate");
  ca->add_option("--iters", attack.iters, "Optimizer iteration budget");
  ca->add_option("--seed", attack.seed, "Global seed");
  ca->callback([&] { run_attack(attack); });

  EvalArgs eval;
  CLI::App* ce = app.add_subcommand("eval", "Rank held-out items with a checkpoint");
  ce->add_option("--data", eval.data, "Dataset directory")->required();
  ce->add_option("--checkpoint", eval.checkpoint, "Model checkpoint")
      ->required()
      ->check(CLI::ExistingFile);
  ce->add_option("--out", eval.out, "Report path");
  ce->add_option("--cutoffs", eval.cutoffs, "Ranking cutoffs")->delimiter(',');
  ce->add_option("--seed", eval.seed, "Global seed");
  ce->callback([&] { run_eval(eval); });

  ReportArgs report;
  CLI::App* cr = app.add_subcommand("report", "Merge run reports into one table");
  cr->add_option("--run", report.runs, "name=dir of a finished run")->required();
  cr->add_option("--out-csv", report.out_csv, "CSV table path");
  cr->add_option("--out-md", report.out_md, "Markdown table path");
  cr->callback([&] { run_report(report); });

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  } catch (const raid::NumericalError& e) {
    std::cerr << "numerical failure: " << e.what() << "\n";
    return 3;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
  return 0;
}
