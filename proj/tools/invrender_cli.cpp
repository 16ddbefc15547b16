#include <cstdint>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <memory>
#include <optional>
#include <string>

#include "CLI11.hpp"
#include "invrender/invrender.h"

namespace fs = std::filesystem;

namespace {

struct Options {
  std::string config;
  std::string out;
  std::string data;
  std::string models;
  std::optional<std::uint64_t> seed;
  std::size_t threads = 1;
  std::string method;
  std::string split = "test";
  std::size_t export_count = 0;
  std::string shape;
  double yaw = 0.0;
  std::size_t width = 32;
  std::size_t height = 32;
  std::string pred;
  std::string truth;
  std::string mode = "corresponded";
  std::string path;
};

// Failure carrying the exit code to use.
struct Exit {
  int code;
};

std::string one_line(std::string s) {
  for (char& c : s)
    if (c == '\n' || c == '\r') c = ' ';
  return s;
}

void print_error(const std::string& message) { std::fprintf(stderr, "invrender: error: %s\n", one_line(message).c_str()); }

int exit_code(ir_status s) {
  switch (s) {
    case IR_OK: return 0;
    case IR_NUMERICAL_FAILURE: return 2;
    default: return 1;
  }
}

void check(ir_status s) {
  if (s == IR_OK) return;
  print_error(ir_last_error());
  throw Exit{exit_code(s)};
}

void on_message(ir_message_kind kind, const char* text, void*) {
  if (kind == IR_MESSAGE_WARNING) {
    std::fprintf(stderr, "invrender: warning: %s\n", one_line(text).c_str());
  } else {
    std::fputs(text, stdout);
    std::fflush(stdout);
  }
}

struct ConfigFree {
  void operator()(ir_config* c) const { ir_config_free(c); }
};
using Config = std::unique_ptr<ir_config, ConfigFree>;

// Explicit path first, then the same name under INVRENDER_CONFIG_DIR. With no
// --config, INVRENDER_CONFIG_DIR/default.cfg is used when present.
std::optional<fs::path> resolve_config(const std::string& given) {
  const char* dir = std::getenv("INVRENDER_CONFIG_DIR");
  if (given.empty()) {
    if (dir && fs::exists(fs::path(dir) / "default.cfg")) return fs::path(dir) / "default.cfg";
    return std::nullopt;
  }
  if (fs::exists(given)) return fs::path(given);
  if (dir && fs::path(given).is_relative() && fs::exists(fs::path(dir) / given)) return fs::path(dir) / given;
  print_error("config file '" + given + "' not found");
  throw Exit{1};
}

Config load_config(const Options& o) {
  ir_config* c = nullptr;
  if (const auto path = resolve_config(o.config)) {
    check(ir_config_load(path->string().c_str(), &c));
  } else {
    check(ir_config_default(&c));
  }
  Config config(c);
  if (o.seed) check(ir_config_set_seed(c, *o.seed));
  if (!o.method.empty()) check(ir_config_set_method(c, o.method.c_str()));
  return config;
}

const char* models_dir(const Options& o) { return o.models.empty() ? o.out.c_str() : o.models.c_str(); }

void add_config(CLI::App* cmd, Options& o) {
  cmd->add_option("--config", o.config, "Experiment config (INI)");
}
void add_out(CLI::App* cmd, Options& o, const char* what) { cmd->add_option("--out", o.out, what)->required(); }
void add_data(CLI::App* cmd, Options& o, bool required) {
  auto* opt = cmd->add_option("--data", o.data, "Dataset directory");
  if (required) opt->required();
}
void add_seed(CLI::App* cmd, Options& o) { cmd->add_option("--seed", o.seed, "Overrides the config seed"); }
void add_threads(CLI::App* cmd, Options& o) {
  cmd->add_option("--threads", o.threads, "Worker threads for file I/O and rendering")
      ->check(CLI::PositiveNumber);
}
void add_method(CLI::App* cmd, Options& o) {
  cmd->add_option("--method", o.method, "Mapping method")->check(CLI::IsMember({"lowdim", "direct", "mlp"}));
}
void add_models(CLI::App* cmd, Options& o) {
  cmd->add_option("--models", o.models, "Directory with image.ssm and shape.ssm (default: --out)");
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Shape reconstruction from depth images through learned subspaces"};
  app.require_subcommand(1);
  app.set_version_flag("--version", ir_version());
  Options o;

  auto* gen = app.add_subcommand("gen", "Generate a synthetic dataset");
  add_config(gen, o);
  add_out(gen, o, "Dataset directory to create");
  add_seed(gen, o);
  add_threads(gen, o);

  auto* pretrain = app.add_subcommand("pretrain", "Fit the image and shape subspaces on the unlabeled pools");
  add_config(pretrain, o);
  add_data(pretrain, o, true);
  add_out(pretrain, o, "Model directory");
  add_threads(pretrain, o);

  auto* fit = app.add_subcommand("fit", "Fit a mapping on the paired training split");
  add_config(fit, o);
  add_data(fit, o, true);
  add_models(fit, o);
  add_out(fit, o, "Output directory for the .map file");
  add_method(fit, o);
  add_seed(fit, o);
  add_threads(fit, o);

  auto* eval = app.add_subcommand("eval", "Reconstruct a paired split and report RMSE");
  add_config(eval, o);
  add_data(eval, o, true);
  add_models(eval, o);
  add_out(eval, o, "Report directory");
  add_method(eval, o);
  eval->add_option("--split", o.split, "Paired split")->check(CLI::IsMember({"train", "test"}));
  eval->add_option("--export", o.export_count, "Write the first N predictions and heat maps");
  add_threads(eval, o);

  auto* compare = app.add_subcommand("compare", "Run all three mappings on identical splits");
  add_config(compare, o);
  add_data(compare, o, false);
  add_out(compare, o, "Report directory; the dataset goes to <out>/data when --data is absent");
  add_seed(compare, o);
  add_threads(compare, o);

  auto* render = app.add_subcommand("render", "Render a shape to a PGM depth image");
  render->add_option("--shape", o.shape, ".voxr or .ply file")->required();
  render->add_option("--yaw", o.yaw, "Yaw in degrees");
  render->add_option("--width", o.width, "Image width")->check(CLI::PositiveNumber);
  render->add_option("--height", o.height, "Image height")->check(CLI::PositiveNumber);
  add_out(render, o, "Output .pgm");

  auto* heat = app.add_subcommand("heatmap", "Per-point error heat map over the ground truth");
  heat->add_option("--pred", o.pred, "Predicted shape (.ply or .voxr)")->required();
  heat->add_option("--truth", o.truth, "Ground-truth shape (.ply or .voxr)")->required();
  heat->add_option("--mode", o.mode, "Error mode")->check(CLI::IsMember({"corresponded", "nearest"}));
  add_out(heat, o, "Output .ply with an error property");

  auto* inspect = app.add_subcommand("inspect", "Describe a model, data file or dataset directory");
  inspect->add_option("path", o.path, "File or directory")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForVersion& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    print_error(e.what());
    return 1;
  }

  ir_set_message_handler(on_message, nullptr);
  try {
    if (gen->parsed()) {
      const Config c = load_config(o);
      check(ir_generate(c.get(), o.out.c_str(), o.threads));
    } else if (pretrain->parsed()) {
      const Config c = load_config(o);
      check(ir_pretrain(c.get(), o.data.c_str(), o.out.c_str(), o.threads));
    } else if (fit->parsed()) {
      const Config c = load_config(o);
      check(ir_fit(c.get(), o.data.c_str(), models_dir(o), o.out.c_str(), o.threads));
    } else if (eval->parsed()) {
      const Config c = load_config(o);
      check(ir_eval(c.get(), o.data.c_str(), models_dir(o), o.split.c_str(), o.out.c_str(), o.export_count,
                    o.threads));
    } else if (compare->parsed()) {
      const Config c = load_config(o);
      check(ir_compare(c.get(), o.data.empty() ? nullptr : o.data.c_str(), o.out.c_str(), o.threads));
    } else if (render->parsed()) {
      check(ir_render(o.shape.c_str(), o.yaw, o.width, o.height, o.out.c_str()));
    } else if (heat->parsed()) {
      check(ir_heatmap(o.pred.c_str(), o.truth.c_str(), o.mode.c_str(), o.out.c_str()));
    } else if (inspect->parsed()) {
      char* text = nullptr;
      check(ir_inspect(o.path.c_str(), &text));
      std::fputs(text, stdout);
      ir_string_free(text);
    }
  } catch (const Exit& e) {
    return e.code;
  }
  return 0;
}
