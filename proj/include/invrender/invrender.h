/* C interface to libinvrender.
 *
 * Every fallible call returns an ir_status. On failure, ir_last_error()
 * describes the problem in one line; the message is per thread and stays
 * valid until the next failing call on that thread. Handles are opaque and
 * owned by the caller, who releases them with the matching *_free function.
 * Strings returned through char** are released with ir_string_free. */
#ifndef INVRENDER_H
#define INVRENDER_H

#include <stddef.h>
#include <stdint.h>

#if defined(_WIN32)
#define IR_API __declspec(dllexport)
#else
#define IR_API __attribute__((visibility("default")))
#endif

#ifdef __cplusplus
extern "C" {
#endif

typedef enum ir_status {
  IR_OK = 0,
  IR_INVALID_INPUT = 1,
  IR_NUMERICAL_FAILURE = 2,
  IR_IO_ERROR = 3,
  IR_FORMAT_ERROR = 4,
  IR_INTERNAL_ERROR = 5
} ir_status;

IR_API const char* ir_last_error(void);
IR_API const char* ir_version(void);
IR_API void ir_string_free(char* s);

/* Dense matrices, row-major. Samples are columns. */
typedef struct ir_matrix ir_matrix;

IR_API ir_status ir_matrix_create(size_t rows, size_t cols, const double* data, ir_matrix** out);
IR_API void ir_matrix_free(ir_matrix* m);
IR_API size_t ir_matrix_rows(const ir_matrix* m);
IR_API size_t ir_matrix_cols(const ir_matrix* m);
/* Copies rows*cols values; fails if capacity is smaller. */
IR_API ir_status ir_matrix_copy_data(const ir_matrix* m, double* out, size_t capacity);
IR_API ir_status ir_matrix_read(const char* path, ir_matrix** out);
IR_API ir_status ir_matrix_write(const char* path, const ir_matrix* m);

/* Thin SVD truncated at the effective rank; sigma comes back as 1 x r. */
IR_API ir_status ir_svd(const ir_matrix* m, ir_matrix** u, ir_matrix** sigma, ir_matrix** v);

/* PCA subspace model (.ssm). */
typedef struct ir_subspace ir_subspace;

IR_API ir_status ir_subspace_fit(const ir_matrix* samples, size_t k, ir_subspace** out);
IR_API ir_status ir_subspace_load(const char* path, ir_subspace** out);
IR_API ir_status ir_subspace_save(const char* path, const ir_subspace* s);
IR_API void ir_subspace_free(ir_subspace* s);
IR_API size_t ir_subspace_dim(const ir_subspace* s);
IR_API size_t ir_subspace_k(const ir_subspace* s);
IR_API ir_status ir_subspace_encode(const ir_subspace* s, const double* x, size_t x_len, double* code, size_t code_len);
IR_API ir_status ir_subspace_decode(const ir_subspace* s, const double* code, size_t code_len, double* x, size_t x_len);

/* Per-sample RMSE over matching columns and its mean. per_sample may be
 * NULL; otherwise it receives cols values. */
IR_API ir_status ir_evaluate_rmse(const ir_matrix* predictions, const ir_matrix* truths, double* average,
                                  double* per_sample, size_t per_sample_capacity);

/* Experiment configuration (INI text). */
typedef struct ir_config ir_config;

IR_API ir_status ir_config_default(ir_config** out);
IR_API ir_status ir_config_load(const char* path, ir_config** out);
IR_API ir_status ir_config_parse(const char* text, ir_config** out);
IR_API void ir_config_free(ir_config* c);
IR_API ir_status ir_config_set_seed(ir_config* c, uint64_t seed);
/* "lowdim", "direct" or "mlp" */
IR_API ir_status ir_config_set_method(ir_config* c, const char* method);
IR_API ir_status ir_config_format(const ir_config* c, char** text);

/* Pipeline stages. Each writes its artifacts into out_dir, then reports a
 * summary and any warnings to the message handler of the calling thread. */
typedef enum ir_message_kind { IR_MESSAGE_SUMMARY = 0, IR_MESSAGE_WARNING = 1 } ir_message_kind;
typedef void (*ir_message_fn)(ir_message_kind kind, const char* text, void* user);
/* NULL drops messages, which is the default. */
IR_API void ir_set_message_handler(ir_message_fn fn, void* user);

IR_API ir_status ir_generate(const ir_config* c, const char* out_dir, size_t threads);
/* Fits image.ssm and shape.ssm from the unlabeled splits of data_dir. The
 * config supplies k_2d and k_3d. */
IR_API ir_status ir_pretrain(const ir_config* c, const char* data_dir, const char* out_dir, size_t threads);
/* Fits mapping_<method>.map on the train split, using the subspaces in
 * model_dir. */
IR_API ir_status ir_fit(const ir_config* c, const char* data_dir, const char* model_dir, const char* out_dir,
                        size_t threads);
/* Evaluates mapping_<method>.map on a split ("train" or "test"). Writes
 * eval_<method>_<split>.csv and .txt, predictions_<method>_<split>.dmat and
 * truth_<split>.dmat; the first export_count predictions are also written as
 * shapes with heat maps. */
IR_API ir_status ir_eval(const ir_config* c, const char* data_dir, const char* model_dir, const char* split,
                         const char* out_dir, size_t export_count, size_t threads);
/* Runs all three mappings on identical splits; writes comparison.csv and
 * comparison.txt. */
IR_API ir_status ir_compare(const ir_config* c, const char* data_dir, const char* out_dir, size_t threads);

/* Renders a .voxr or .ply shape to a PGM depth image. */
IR_API ir_status ir_render(const char* shape_path, double yaw_deg, size_t width, size_t height,
                           const char* out_path);
/* Heat map over the ground-truth points, mode "corresponded" or "nearest".
 * Voxel inputs are converted to occupied cell centers. */
IR_API ir_status ir_heatmap(const char* prediction_path, const char* truth_path, const char* mode,
                            const char* out_path);
/* Human-readable summary of a file or dataset directory. */
IR_API ir_status ir_inspect(const char* path, char** text);

#ifdef __cplusplus
}
#endif

#endif
