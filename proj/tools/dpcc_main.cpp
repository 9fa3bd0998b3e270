#include "CLI11.hpp"

#include "dpcc/codec.hpp"
#include "dpcc/evaluation.hpp"
#include "dpcc/training.hpp"

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>

namespace fs = std::filesystem;
using namespace dpcc;

namespace {

std::vector<std::string> list_ply(const std::string& dir) {
  require(fs::is_directory(dir), ErrorKind::io, "not a directory: " + dir);
  std::vector<std::string> files;
  for (const auto& entry : fs::directory_iterator(dir))
    if (entry.is_regular_file() && entry.path().extension() == ".ply")
      files.push_back(entry.path().string());
  std::sort(files.begin(), files.end());
  require(!files.empty(), ErrorKind::io, "no .ply files in " + dir);
  return files;
}

std::vector<PointCloud> load_dir(const std::string& dir) {
  std::vector<PointCloud> clouds;
  for (const std::string& f : list_ply(dir)) clouds.push_back(load_ply(f));
  return clouds;
}

// flat key=value lines, # comments; keys mirror the config struct fields
void parse_config_file(const std::string& path, ModelConfig& model, TrainConfig& train,
                       uint64_t& init_seed) {
  std::ifstream in(path);
  require(in.good(), ErrorKind::io, "cannot read config " + path);
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    auto strip = [](std::string s) {
      size_t b = s.find_first_not_of(" \t\r");
      if (b == std::string::npos) return std::string{};
      size_t e = s.find_last_not_of(" \t\r");
      return s.substr(b, e - b + 1);
    };
    std::string entry = strip(line);
    if (entry.empty()) continue;
    auto eq = entry.find('=');
    require(eq != std::string::npos, ErrorKind::parse,
            "config line " + std::to_string(line_no) + " is not key=value");
    std::string key = strip(entry.substr(0, eq));
    std::string val = strip(entry.substr(eq + 1));
    require(!key.empty() && !val.empty(), ErrorKind::parse,
            "config line " + std::to_string(line_no) + " is not key=value");

    auto as_int = [&] {
      try {
        size_t used = 0;
        long long v = std::stoll(val, &used);
        require(used == val.size(), ErrorKind::parse, "bad integer for " + key);
        return v;
      } catch (const std::exception&) {
        fail(ErrorKind::parse, "bad integer for " + key + ": " + val);
      }
    };
    auto as_double = [&] {
      try {
        size_t used = 0;
        double v = std::stod(val, &used);
        require(used == val.size(), ErrorKind::parse, "bad number for " + key);
        return v;
      } catch (const std::exception&) {
        fail(ErrorKind::parse, "bad number for " + key + ": " + val);
      }
    };
    auto as_bool = [&] {
      if (val == "true" || val == "1") return true;
      if (val == "false" || val == "0") return false;
      fail(ErrorKind::parse, "bad boolean for " + key + ": " + val);
    };

    if (key == "C") model.C = static_cast<int>(as_int());
    else if (key == "C_z") model.C_z = static_cast<int>(as_int());
    else if (key == "S") model.S = static_cast<int>(as_int());
    else if (key == "k_enc") model.k_enc = static_cast<int>(as_int());
    else if (key == "k_gen") model.k_gen = static_cast<int>(as_int());
    else if (key == "heads") model.heads = static_cast<int>(as_int());
    else if (key == "label_vocab") model.label_vocab = static_cast<int>(as_int());
    else if (key == "T") model.T = static_cast<int>(as_int());
    else if (key == "use_shape_latent") model.use_shape_latent = as_bool();
    else if (key == "use_detail_latent") model.use_detail_latent = as_bool();
    else if (key == "lambda") train.lambda = as_double();
    else if (key == "gamma") train.gamma = as_double();
    else if (key == "steps") train.steps = as_int();
    else if (key == "batch") train.batch = static_cast<int>(as_int());
    else if (key == "lr") train.lr = as_double();
    else if (key == "lr_decay") train.lr_decay = as_double();
    else if (key == "lr_decay_every") train.lr_decay_every = as_int();
    else if (key == "adam_beta1") train.adam_beta1 = as_double();
    else if (key == "adam_beta2") train.adam_beta2 = as_double();
    else if (key == "points_per_cloud") train.points_per_cloud = static_cast<int>(as_int());
    else if (key == "metrics_every") train.metrics_every = as_int();
    else if (key == "checkpoint_every") train.checkpoint_every = as_int();
    else if (key == "seed") train.seed = static_cast<uint64_t>(as_int());
    else if (key == "init_seed") init_seed = static_cast<uint64_t>(as_int());
    else fail(ErrorKind::parse, "unknown config key: " + key);
  }
}

int cmd_train(const std::string& data_dir, const std::string& config_path,
              const std::string& out_dir) {
  ModelConfig mc;
  TrainConfig tc;
  uint64_t init_seed = 7;
  parse_config_file(config_path, mc, tc, init_seed);

  std::vector<PointCloud> clouds = load_dir(data_dir);
  fs::create_directories(out_dir);
  std::string ckpt = (fs::path(out_dir) / "model.ckpt").string();
  std::string metrics = (fs::path(out_dir) / "metrics.csv").string();

  Model model(mc, init_seed);
  TrainResult result = train_model(model, clouds, tc, ckpt, metrics);
  std::cout << "trained " << tc.steps << " steps on " << clouds.size() << " clouds\n";
  std::cout << "final loss " << result.history.back().loss << "\n";
  std::cout << "checkpoint " << ckpt << "\n";
  std::cout << "metrics " << metrics << "\n";
  return 0;
}

int cmd_encode(const std::string& input, const std::string& model_path,
               const std::string& output, uint64_t seed, int label) {
  std::unique_ptr<Model> model = load_checkpoint(model_path);
  PointCloud cloud = load_ply(input);
  if (label >= 0) cloud.label = label;

  EncodeResult enc = encode_cloud(*model, cloud, seed);
  write_binary_file(output, enc.bytes);

  std::cout << "points " << enc.header.n_points << "\n";
  std::cout << "bpp " << std::setprecision(17)
            << compute_bpp(enc.bytes.size(), enc.header.n_points) << "\n";
  std::cout << "shape_bits " << enc.payload_bytes[0] * 8 << "\n";
  std::cout << "hyper_bits " << enc.payload_bytes[1] * 8 << "\n";
  std::cout << "detail_bits " << enc.payload_bytes[2] * 8 << "\n";
  return 0;
}

int cmd_decode(const std::string& input, const std::string& model_path,
               const std::string& output) {
  std::unique_ptr<Model> model = load_checkpoint(model_path);
  PointCloud cloud = decode_cloud(*model, read_binary_file(input));
  save_ply(output, cloud);
  std::cout << "points " << cloud.size() << "\n";
  std::cout << "wrote " << output << "\n";
  return 0;
}

int cmd_eval(const std::string& data_dir, const std::vector<std::string>& model_paths,
             const std::string& out_csv, uint64_t seed) {
  std::vector<std::unique_ptr<Model>> models;
  std::vector<const Model*> views;
  for (const std::string& p : model_paths) {
    models.push_back(load_checkpoint(p));
    views.push_back(models.back().get());
  }
  std::vector<PointCloud> clouds = load_dir(data_dir);

  EvalReport report = evaluate_codec(views, clouds, seed);
  write_rd_csv(out_csv, report.table);
  std::string plot = (fs::path(out_csv).replace_extension(".svg")).string();
  write_rd_svg(plot, report.table);

  for (const RdPoint& p : report.table)
    std::cout << "lambda " << p.lambda << "  bpp " << p.bpp << "  psnr_d1 " << p.psnr_d1
              << "  chamfer " << p.chamfer << "\n";
  std::cout << "wrote " << out_csv << "\n";
  std::cout << "wrote " << plot << "\n";
  return 0;
}

int cmd_bdmetrics(const std::string& anchor_csv, const std::string& test_csv) {
  std::vector<RdPoint> anchor = read_rd_csv(anchor_csv);
  std::vector<RdPoint> test = read_rd_csv(test_csv);
  double dpsnr = bd_psnr(anchor, test);
  double drate = bd_rate(anchor, test);
  std::printf("BD-PSNR: %.3f dB\n", dpsnr);
  std::printf("BD-Rate: %.2f %%\n", drate);
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"learned lossy point cloud geometry codec"};
  app.require_subcommand(1);

  std::string data_dir, config_path, out_path, input, model_path, output;
  std::vector<std::string> model_paths;
  std::string anchor_csv, test_csv;
  uint64_t seed = 2024;
  int label = -1;

  CLI::App* train = app.add_subcommand("train", "fit a model on a directory of .ply clouds");
  train->add_option("--data", data_dir, "directory of training .ply files")->required();
  train->add_option("--config", config_path, "key=value config file")->required();
  train->add_option("--out", out_path, "output directory")->required();

  CLI::App* encode = app.add_subcommand("encode", "compress one .ply into a .dpcc container");
  encode->add_option("--input", input, "input .ply")->required();
  encode->add_option("--model", model_path, "model checkpoint")->required();
  encode->add_option("--output", output, "output .dpcc")->required();
  encode->add_option("--seed", seed, "decoder sampling seed stored in the header");
  encode->add_option("--label", label, "class label to embed (-1: none)");

  CLI::App* decode = app.add_subcommand("decode", "reconstruct a .ply from a .dpcc container");
  decode->add_option("--input", input, "input .dpcc")->required();
  decode->add_option("--model", model_path, "model checkpoint")->required();
  decode->add_option("--output", output, "output .ply")->required();

  CLI::App* eval = app.add_subcommand("eval", "rate-distortion sweep over checkpoints");
  eval->add_option("--data", data_dir, "directory of evaluation .ply files")->required();
  eval->add_option("--models", model_paths, "checkpoints, one per rate point")
      ->required()
      ->delimiter(',');
  eval->add_option("--out", out_path, "output CSV path")->required();
  eval->add_option("--seed", seed, "evaluation seed");

  CLI::App* bd = app.add_subcommand("bdmetrics", "Bjontegaard deltas between two RD CSVs");
  bd->add_option("--anchor", anchor_csv, "anchor curve CSV")->required();
  bd->add_option("--test", test_csv, "candidate curve CSV")->required();

  CLI11_PARSE(app, argc, argv);

  try {
    if (train->parsed()) return cmd_train(data_dir, config_path, out_path);
    if (encode->parsed()) return cmd_encode(input, model_path, output, seed, label);
    if (decode->parsed()) return cmd_decode(input, model_path, output);
    if (eval->parsed()) return cmd_eval(data_dir, model_paths, out_path, seed);
    if (bd->parsed()) return cmd_bdmetrics(anchor_csv, test_csv);
  } catch (const Error& e) {
    std::cerr << "error[" << to_string(e.kind()) << "]: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error[internal]: " << e.what() << "\n";
    return 1;
  }
  return 1;
}
