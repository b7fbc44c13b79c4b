#include <stdio.h>
#include <string.h>
#include "see.h"

#define CHECK(c) do { if (!(c)) { fprintf(stderr, "failed: %s (%s)\n", #c, see_last_error() ? see_last_error() : ""); return 1; } } while (0)

int main(void) {
    SeeModel *m = NULL;
    CHECK(see_model_from_toml("[model]\nkind = \"toy3\"\ndiscount = 0.1\n[refine]\nfind_threshold = true\n", &m) == SEE_STATUS_OK);
    CHECK(see_model_n_states(m) == 3);
    SeeEquilibria *set = NULL;
    CHECK(see_enumerate(m, &set) == SEE_STATUS_OK);
    CHECK(see_equilibria_len(set) == 1);
    double wx[3], we[3];
    CHECK(see_equilibria_values(set, 0, wx, we, 3) == SEE_STATUS_OK);
    CHECK(see_equilibria_values(set, 5, wx, we, 3) == SEE_STATUS_OUT_OF_RANGE);
    SeeReport *r = NULL;
    CHECK(see_refine(m, &r) == SEE_STATUS_OK);
    SeeCounts c;
    CHECK(see_report_counts(r, &c) == SEE_STATUS_OK && c.selected);
    char *json = see_report_to_json(r);
    CHECK(json != NULL && strstr(json, "\"selected\"") != NULL);
    see_string_free(json);
    see_report_free(r);
    see_equilibria_free(set);
    see_model_free(m);
    CHECK(see_model_from_toml("[model]\nkind = \"toy3\"\n", &m) == SEE_STATUS_CONFIG);
    CHECK(m == NULL && strstr(see_last_error(), "model.discount") != NULL);
    printf("ok %s\n", see_version());
    return 0;
}
