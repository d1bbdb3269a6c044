#include <stdio.h>
#include <string.h>

#include "bclearn.h"

#define CHECK(call)                                                          \
  do {                                                                       \
    BcStatus s_ = (call);                                                    \
    if (s_ != BC_STATUS_OK) {                                                \
      fprintf(stderr, "%s -> %d: %s\n", #call, (int)s_,                      \
              bc_last_error_message());                                      \
      return 1;                                                              \
    }                                                                        \
  } while (0)

int main(void) {
  BcDataset *full = NULL, *thinned = NULL;
  BcModel *model = NULL;
  CHECK(bc_dataset_simulate("M1", 1000, 2, &full));
  CHECK(bc_dataset_delete_entries(full, 0.2, 2, &thinned));

  CHECK(bc_learn(thinned, NULL, 0, -1, 1.0, 1.0, BC_PHI_MAR, &model));
  size_t n = 0;
  CHECK(bc_model_num_arcs(model, &n));
  uint32_t from[8], to[8];
  CHECK(bc_model_arcs(model, from, to, 8));

  double score = 0.0;
  CHECK(bc_score(model, thinned, 1.0, 1.0, BC_PHI_MAR, &score));
  printf("arcs=%zu", n);
  for (size_t i = 0; i < n; i++) printf(" %u->%u", from[i], to[i]);
  printf(" score=%.6f\n", score);

  if (bc_dataset_simulate("M9", 10, 0, &full) != BC_STATUS_INVALID_ARGUMENT) return 1;
  if (strstr(bc_last_error_message(), "M9") == NULL) return 1;

  bc_model_free(model);
  bc_dataset_free(thinned);
  bc_dataset_free(full);
  return 0;
}
