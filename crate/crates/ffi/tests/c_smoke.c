#include <stdio.h>
#include <string.h>
#include "lissajous_swarm.h"

static const char *SCENARIO =
    "duration = 2.0\n"
    "[curve]\nA = 20.0\nB = 20.0\nC = 2.0\na = 3\nb = 4\nc = 5\nphi = 1.5707963267948966\n"
    "[swarm]\nN = 7\nomega = 0.03\nK = 30.0\ndt = 0.01\ncomm_period = 1\n"
    "[mission]\nA = 20.0\nB = 20.0\neta = 1.05\n";

int main(void) {
    LsScenario *sc = NULL;
    if (ls_scenario_from_toml(SCENARIO, &sc) != LS_STATUS_OK) {
        fprintf(stderr, "parse: %s\n", ls_last_error_message());
        return 1;
    }
    size_t n = 0;
    ls_scenario_robot_count(sc, &n);
    LsRun *run = NULL;
    if (ls_run(sc, &run) != LS_STATUS_OK) {
        fprintf(stderr, "run: %s\n", ls_last_error_message());
        return 1;
    }
    size_t rows = 0;
    ls_run_trace_rows(run, &rows);
    char *summary = NULL;
    ls_run_summary_json(run, &summary);
    int ok = n == 7 && rows == 201 && strstr(summary, "\"robots\":7") != NULL;
    ls_string_free(summary);
    ls_run_free(run);

    LsScenario *bad = NULL;
    LsStatus s = ls_scenario_from_toml("duration = 1.0", &bad);
    ok = ok && s == LS_STATUS_INVALID_CONFIG && bad == NULL && ls_last_error_message() != NULL;
    ls_scenario_free(sc);
    printf("%s n=%zu rows=%zu\n", ok ? "ok" : "FAIL", n, rows);
    return ok ? 0 : 1;
}
