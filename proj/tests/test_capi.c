/* Exercises the shared library through its C header only. */
#include <math.h>
#include <stdio.h>
#include <stdlib.h>
#include <string.h>

#include "invrender/invrender.h"

static int failures = 0;

#define EXPECT(cond)                                              \
  do {                                                            \
    if (!(cond)) {                                                \
      fprintf(stderr, "%s:%d: failed: %s\n", __FILE__, __LINE__, #cond); \
      ++failures;                                                 \
    }                                                             \
  } while (0)

static int summaries = 0;

static void count_messages(ir_message_kind kind, const char* text, void* user) {
  (void)user;
  if (kind == IR_MESSAGE_SUMMARY && strstr(text, "train:") != NULL) ++summaries;
}

static void matrices(const char* dir) {
  const double data[6] = {3, 1, 1, -1, 3, 1};
  ir_matrix* m = NULL;
  EXPECT(ir_matrix_create(2, 3, data, &m) == IR_OK);
  EXPECT(ir_matrix_rows(m) == 2 && ir_matrix_cols(m) == 3);

  char path[512];
  snprintf(path, sizeof path, "%s/m.dmat", dir);
  EXPECT(ir_matrix_write(path, m) == IR_OK);
  ir_matrix* back = NULL;
  EXPECT(ir_matrix_read(path, &back) == IR_OK);
  double copy[6] = {0};
  EXPECT(ir_matrix_copy_data(back, copy, 6) == IR_OK);
  EXPECT(memcmp(copy, data, sizeof data) == 0);
  EXPECT(ir_matrix_copy_data(back, copy, 5) == IR_INVALID_INPUT);

  /* singular values of [[3,1,1],[-1,3,1]] are sqrt(12) and sqrt(10) */
  ir_matrix *u = NULL, *s = NULL, *v = NULL;
  EXPECT(ir_svd(m, &u, &s, &v) == IR_OK);
  double sigma[2] = {0};
  EXPECT(ir_matrix_cols(s) == 2);
  EXPECT(ir_matrix_copy_data(s, sigma, 2) == IR_OK);
  EXPECT(fabs(sigma[0] - sqrt(12.0)) < 1e-12);
  EXPECT(fabs(sigma[1] - sqrt(10.0)) < 1e-12);
  EXPECT(ir_matrix_rows(u) == 2 && ir_matrix_rows(v) == 3);

  ir_matrix_free(u);
  ir_matrix_free(s);
  ir_matrix_free(v);
  ir_matrix_free(back);
  ir_matrix_free(m);
}

static void rmse(void) {
  const double p[2] = {3, 4}, t[2] = {0, 0};
  ir_matrix *pm = NULL, *tm = NULL, *bad = NULL;
  ir_matrix_create(2, 1, p, &pm);
  ir_matrix_create(2, 1, t, &tm);
  double avg = 0.0, per[1] = {0};
  EXPECT(ir_evaluate_rmse(pm, tm, &avg, per, 1) == IR_OK);
  EXPECT(fabs(avg - sqrt(12.5)) < 1e-15);
  EXPECT(per[0] == avg);
  EXPECT(ir_evaluate_rmse(pm, tm, &avg, NULL, 0) == IR_OK);
  ir_matrix_create(1, 2, p, &bad);
  EXPECT(ir_evaluate_rmse(pm, bad, &avg, NULL, 0) == IR_INVALID_INPUT);
  EXPECT(strlen(ir_last_error()) > 0);
  ir_matrix_free(pm);
  ir_matrix_free(tm);
  ir_matrix_free(bad);
}

static void subspaces(const char* dir) {
  /* two points (1,1) and (3,3): one direction along the diagonal */
  const double data[4] = {1, 3, 1, 3};
  ir_matrix* m = NULL;
  ir_matrix_create(2, 2, data, &m);
  ir_subspace* s = NULL;
  EXPECT(ir_subspace_fit(m, 1, &s) == IR_OK);
  EXPECT(ir_subspace_dim(s) == 2 && ir_subspace_k(s) == 1);
  const double x[2] = {4, 4};
  double code[1] = {0}, y[2] = {0};
  EXPECT(ir_subspace_encode(s, x, 2, code, 1) == IR_OK);
  EXPECT(fabs(fabs(code[0]) - 2.0 * sqrt(2.0)) < 1e-12);
  EXPECT(ir_subspace_decode(s, code, 1, y, 2) == IR_OK);
  EXPECT(fabs(y[0] - 4.0) < 1e-12 && fabs(y[1] - 4.0) < 1e-12);
  EXPECT(ir_subspace_encode(s, x, 1, code, 1) == IR_INVALID_INPUT);
  EXPECT(ir_subspace_decode(s, code, 1, y, 3) == IR_INVALID_INPUT);
  EXPECT(ir_subspace_fit(m, 3, &s) == IR_INVALID_INPUT);

  char path[512];
  snprintf(path, sizeof path, "%s/s.ssm", dir);
  EXPECT(ir_subspace_save(path, s) == IR_OK);
  ir_subspace* back = NULL;
  EXPECT(ir_subspace_load(path, &back) == IR_OK);
  EXPECT(ir_subspace_k(back) == 1);

  char* text = NULL;
  EXPECT(ir_inspect(path, &text) == IR_OK);
  EXPECT(text != NULL && strstr(text, "type: ssm") != NULL);
  ir_string_free(text);

  ir_subspace_free(back);
  ir_subspace_free(s);
  ir_matrix_free(m);
}

static void configs_and_stages(const char* dir) {
  ir_config* c = NULL;
  EXPECT(ir_config_parse("[model]\nk_2d = 0\n", &c) == IR_INVALID_INPUT);
  EXPECT(strstr(ir_last_error(), "k_2d") != NULL);
  EXPECT(ir_config_parse(
             "[dataset]\nunlabeled_2d = 6\nunlabeled_3d = 6\npaired_train = 4\npaired_test = 2\n"
             "resolution = 8\nimage_width = 8\nimage_height = 8\nview_count = 2\n"
             "[model]\nk_2d = 3\nk_3d = 3\n",
             &c) == IR_OK);
  EXPECT(ir_config_set_method(c, "direct") == IR_OK);
  EXPECT(ir_config_set_method(c, "cnn") == IR_INVALID_INPUT);
  EXPECT(ir_config_set_seed(c, 5) == IR_OK);
  char* text = NULL;
  EXPECT(ir_config_format(c, &text) == IR_OK);
  EXPECT(strstr(text, "method = direct") != NULL);
  EXPECT(strstr(text, "seed = 5") != NULL);
  ir_string_free(text);

  char data[512], models[512], reports[512];
  snprintf(data, sizeof data, "%s/data", dir);
  snprintf(models, sizeof models, "%s/models", dir);
  snprintf(reports, sizeof reports, "%s/reports", dir);
  ir_set_message_handler(count_messages, NULL);
  EXPECT(ir_generate(c, data, 1) == IR_OK);
  ir_set_message_handler(NULL, NULL);
  EXPECT(summaries == 1);
  EXPECT(ir_pretrain(c, data, models, 1) == IR_OK);
  EXPECT(ir_fit(c, data, models, models, 1) == IR_OK);
  EXPECT(ir_eval(c, data, models, "test", reports, 1, 1) == IR_OK);
  EXPECT(ir_eval(c, data, models, "unlabeled", reports, 0, 1) == IR_INVALID_INPUT);
  EXPECT(ir_compare(c, data, reports, 1) == IR_OK);

  char path[600];
  snprintf(path, sizeof path, "%s/missing.map", dir);
  EXPECT(ir_inspect(path, &text) == IR_IO_ERROR);
  EXPECT(ir_heatmap(path, path, "sideways", path) == IR_INVALID_INPUT);
  ir_config_free(c);
}

int main(int argc, char** argv) {
  if (argc != 2) {
    fprintf(stderr, "usage: %s SCRATCH_DIR\n", argv[0]);
    return 2;
  }
  EXPECT(strlen(ir_version()) > 0);
  EXPECT(ir_matrix_create(1, 1, NULL, NULL) == IR_INVALID_INPUT);
  EXPECT(strstr(ir_last_error(), "null") != NULL);
  EXPECT(ir_matrix_rows(NULL) == 0);
  ir_matrix_free(NULL);

  matrices(argv[1]);
  rmse();
  subspaces(argv[1]);
  configs_and_stages(argv[1]);
  if (failures) fprintf(stderr, "%d check(s) failed\n", failures);
  else printf("all C API checks passed\n");
  return failures ? 1 : 0;
}
