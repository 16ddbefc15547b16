#include "invrender/invrender.h"

#include <cstdlib>
#include <cstring>
#include <new>
#include <string>

#include "invrender/error.hpp"
#include "invrender/io.hpp"
#include "invrender/pipeline.hpp"
#include "invrender/subspace.hpp"
#include "invrender/workflow.hpp"

struct ir_matrix {
  invrender::Matrix m;
};

struct ir_subspace {
  invrender::SubspaceModel model;
};

struct ir_config {
  invrender::ExperimentConfig config;
};

namespace {

thread_local std::string last_error;
thread_local ir_message_fn message_fn = nullptr;
thread_local void* message_user = nullptr;

void report(const invrender::RunLog& log) {
  if (!message_fn) return;
  if (!log.summary.empty()) message_fn(IR_MESSAGE_SUMMARY, log.summary.c_str(), message_user);
  for (const std::string& w : log.warnings) message_fn(IR_MESSAGE_WARNING, w.c_str(), message_user);
}

ir_status fail(ir_status status, const std::string& message) {
  last_error = message;
  return status;
}

template <typename F>
ir_status guarded(F&& body) {
  try {
    body();
    return IR_OK;
  } catch (const invrender::Error& e) {
    switch (e.kind()) {
      case invrender::ErrorKind::InvalidInput: return fail(IR_INVALID_INPUT, e.what());
      case invrender::ErrorKind::NumericalFailure: return fail(IR_NUMERICAL_FAILURE, e.what());
      case invrender::ErrorKind::Io: return fail(IR_IO_ERROR, e.what());
      case invrender::ErrorKind::Format: return fail(IR_FORMAT_ERROR, e.what());
    }
    return fail(IR_INTERNAL_ERROR, e.what());
  } catch (const std::filesystem::filesystem_error& e) {
    return fail(IR_IO_ERROR, e.what());
  } catch (const std::bad_alloc&) {
    return fail(IR_INTERNAL_ERROR, "out of memory");
  } catch (const std::exception& e) {
    return fail(IR_INTERNAL_ERROR, e.what());
  } catch (...) {
    return fail(IR_INTERNAL_ERROR, "unknown error");
  }
}

#define IR_REQUIRE(ptr)                                                           \
  do {                                                                            \
    if (!(ptr)) return fail(IR_INVALID_INPUT, std::string(#ptr) + " is null"); \
  } while (0)

char* duplicate(const std::string& s) {
  char* out = static_cast<char*>(std::malloc(s.size() + 1));
  if (!out) throw std::bad_alloc();
  std::memcpy(out, s.c_str(), s.size() + 1);
  return out;
}

template <typename T, typename... Args>
T* make(Args&&... args) {
  return new T{std::forward<Args>(args)...};
}

}  // namespace

extern "C" {

const char* ir_last_error(void) { return last_error.c_str(); }

const char* ir_version(void) { return "1.0.0"; }

void ir_string_free(char* s) { std::free(s); }

void ir_set_message_handler(ir_message_fn fn, void* user) {
  message_fn = fn;
  message_user = user;
}

ir_status ir_matrix_create(size_t rows, size_t cols, const double* data, ir_matrix** out) {
  IR_REQUIRE(out);
  if (rows * cols > 0) IR_REQUIRE(data);
  return guarded([&] {
    *out = make<ir_matrix>(invrender::Matrix(rows, cols, std::vector<double>(data, data + rows * cols)));
  });
}

void ir_matrix_free(ir_matrix* m) { delete m; }

size_t ir_matrix_rows(const ir_matrix* m) { return m ? m->m.rows() : 0; }

size_t ir_matrix_cols(const ir_matrix* m) { return m ? m->m.cols() : 0; }

ir_status ir_matrix_copy_data(const ir_matrix* m, double* out, size_t capacity) {
  IR_REQUIRE(m);
  if (m->m.size() > 0) IR_REQUIRE(out);
  if (capacity < m->m.size())
    return fail(IR_INVALID_INPUT, "buffer holds " + std::to_string(capacity) + " values, matrix has " +
                                      std::to_string(m->m.size()));
  std::copy(m->m.data().begin(), m->m.data().end(), out);
  return IR_OK;
}

ir_status ir_matrix_read(const char* path, ir_matrix** out) {
  IR_REQUIRE(path);
  IR_REQUIRE(out);
  return guarded([&] { *out = make<ir_matrix>(invrender::io::read_matrix(path)); });
}

ir_status ir_matrix_write(const char* path, const ir_matrix* m) {
  IR_REQUIRE(path);
  IR_REQUIRE(m);
  return guarded([&] { invrender::io::write_matrix(path, m->m); });
}

ir_status ir_svd(const ir_matrix* m, ir_matrix** u, ir_matrix** sigma, ir_matrix** v) {
  IR_REQUIRE(m);
  IR_REQUIRE(u);
  IR_REQUIRE(sigma);
  IR_REQUIRE(v);
  return guarded([&] {
    invrender::SvdResult r = invrender::svd(m->m);
    const std::size_t rank = r.sigma.size();
    *u = make<ir_matrix>(std::move(r.u));
    *sigma = make<ir_matrix>(invrender::Matrix(1, rank, std::move(r.sigma)));
    *v = make<ir_matrix>(std::move(r.v));
  });
}

ir_status ir_subspace_fit(const ir_matrix* samples, size_t k, ir_subspace** out) {
  IR_REQUIRE(samples);
  IR_REQUIRE(out);
  return guarded([&] { *out = make<ir_subspace>(invrender::fit_subspace(samples->m, k)); });
}

ir_status ir_subspace_load(const char* path, ir_subspace** out) {
  IR_REQUIRE(path);
  IR_REQUIRE(out);
  return guarded([&] { *out = make<ir_subspace>(invrender::load_subspace(path)); });
}

ir_status ir_subspace_save(const char* path, const ir_subspace* s) {
  IR_REQUIRE(path);
  IR_REQUIRE(s);
  return guarded([&] { invrender::save_subspace(path, s->model); });
}

void ir_subspace_free(ir_subspace* s) { delete s; }

size_t ir_subspace_dim(const ir_subspace* s) { return s ? s->model.dim() : 0; }

size_t ir_subspace_k(const ir_subspace* s) { return s ? s->model.k() : 0; }

ir_status ir_subspace_encode(const ir_subspace* s, const double* x, size_t x_len, double* code, size_t code_len) {
  IR_REQUIRE(s);
  IR_REQUIRE(x);
  IR_REQUIRE(code);
  if (code_len != s->model.k())
    return fail(IR_INVALID_INPUT, "code buffer has " + std::to_string(code_len) + " slots, model k is " +
                                      std::to_string(s->model.k()));
  return guarded([&] {
    const invrender::Vector c = invrender::encode(s->model, {x, x_len});
    std::copy(c.begin(), c.end(), code);
  });
}

ir_status ir_subspace_decode(const ir_subspace* s, const double* code, size_t code_len, double* x, size_t x_len) {
  IR_REQUIRE(s);
  IR_REQUIRE(code);
  IR_REQUIRE(x);
  if (x_len != s->model.dim())
    return fail(IR_INVALID_INPUT, "output buffer has " + std::to_string(x_len) + " slots, model dimension is " +
                                      std::to_string(s->model.dim()));
  return guarded([&] {
    const invrender::Vector v = invrender::decode(s->model, {code, code_len});
    std::copy(v.begin(), v.end(), x);
  });
}

ir_status ir_evaluate_rmse(const ir_matrix* predictions, const ir_matrix* truths, double* average, double* per_sample,
                           size_t per_sample_capacity) {
  IR_REQUIRE(predictions);
  IR_REQUIRE(truths);
  IR_REQUIRE(average);
  if (per_sample && per_sample_capacity < predictions->m.cols())
    return fail(IR_INVALID_INPUT, "per-sample buffer holds " + std::to_string(per_sample_capacity) + " values, need " +
                                      std::to_string(predictions->m.cols()));
  return guarded([&] {
    const invrender::EvaluationReport r = invrender::evaluate_rmse(predictions->m, truths->m);
    *average = r.average_rmse;
    if (per_sample) std::copy(r.per_sample_rmse.begin(), r.per_sample_rmse.end(), per_sample);
  });
}

ir_status ir_config_default(ir_config** out) {
  IR_REQUIRE(out);
  return guarded([&] { *out = make<ir_config>(); });
}

ir_status ir_config_load(const char* path, ir_config** out) {
  IR_REQUIRE(path);
  IR_REQUIRE(out);
  return guarded([&] { *out = make<ir_config>(invrender::load_config(path)); });
}

ir_status ir_config_parse(const char* text, ir_config** out) {
  IR_REQUIRE(text);
  IR_REQUIRE(out);
  return guarded([&] { *out = make<ir_config>(invrender::parse_config(text)); });
}

void ir_config_free(ir_config* c) { delete c; }

ir_status ir_config_set_seed(ir_config* c, uint64_t seed) {
  IR_REQUIRE(c);
  c->config.dataset.seed = seed;
  c->config.train_seed = seed;
  return IR_OK;
}

ir_status ir_config_set_method(ir_config* c, const char* method) {
  IR_REQUIRE(c);
  IR_REQUIRE(method);
  return guarded([&] { c->config.method = invrender::parse_map_kind(method); });
}

ir_status ir_config_format(const ir_config* c, char** text) {
  IR_REQUIRE(c);
  IR_REQUIRE(text);
  return guarded([&] { *text = duplicate(invrender::format_config(c->config)); });
}

ir_status ir_generate(const ir_config* c, const char* out_dir, size_t threads) {
  IR_REQUIRE(c);
  IR_REQUIRE(out_dir);
  return guarded([&] { report(invrender::run_generate(c->config, out_dir, threads)); });
}

ir_status ir_pretrain(const ir_config* c, const char* data_dir, const char* out_dir, size_t threads) {
  IR_REQUIRE(c);
  IR_REQUIRE(data_dir);
  IR_REQUIRE(out_dir);
  return guarded([&] { report(invrender::run_pretrain(c->config, data_dir, out_dir, threads)); });
}

ir_status ir_fit(const ir_config* c, const char* data_dir, const char* model_dir, const char* out_dir,
                 size_t threads) {
  IR_REQUIRE(c);
  IR_REQUIRE(data_dir);
  IR_REQUIRE(model_dir);
  IR_REQUIRE(out_dir);
  return guarded([&] { report(invrender::run_fit(c->config, data_dir, model_dir, out_dir, threads)); });
}

ir_status ir_eval(const ir_config* c, const char* data_dir, const char* model_dir, const char* split,
                  const char* out_dir, size_t export_count, size_t threads) {
  IR_REQUIRE(c);
  IR_REQUIRE(data_dir);
  IR_REQUIRE(model_dir);
  IR_REQUIRE(split);
  IR_REQUIRE(out_dir);
  return guarded(
      [&] { report(invrender::run_eval(c->config, data_dir, model_dir, split, out_dir, export_count, threads)); });
}

ir_status ir_compare(const ir_config* c, const char* data_dir, const char* out_dir, size_t threads) {
  IR_REQUIRE(c);
  IR_REQUIRE(out_dir);
  return guarded([&] { report(invrender::run_compare(c->config, data_dir ? data_dir : "", out_dir, threads)); });
}

ir_status ir_render(const char* shape_path, double yaw_deg, size_t width, size_t height, const char* out_path) {
  IR_REQUIRE(shape_path);
  IR_REQUIRE(out_path);
  return guarded([&] { invrender::run_render(shape_path, yaw_deg, width, height, out_path); });
}

ir_status ir_heatmap(const char* prediction_path, const char* truth_path, const char* mode, const char* out_path) {
  IR_REQUIRE(prediction_path);
  IR_REQUIRE(truth_path);
  IR_REQUIRE(mode);
  IR_REQUIRE(out_path);
  return guarded([&] {
    report(invrender::run_heatmap(prediction_path, truth_path, invrender::parse_heat_mode(mode), out_path));
  });
}

ir_status ir_inspect(const char* path, char** text) {
  IR_REQUIRE(path);
  IR_REQUIRE(text);
  return guarded([&] { *text = duplicate(invrender::inspect(path)); });
}

}  // extern "C"
