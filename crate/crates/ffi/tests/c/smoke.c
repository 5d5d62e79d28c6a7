#include <math.h>
#include <stdio.h>
#include "g2flow.h"

int main(void) {
    G2Metric *m = NULL;
    if (g2flow_metric_new(1.0, 1.0 / 128.0, 3200.0, 1e-12, &m) != G2_STATUS_OK) return 10;
    double ell = 0.0, err = 0.0;
    if (g2flow_metric_ell(m, &ell, &err) != G2_STATUS_OK) return 11;
    G2Instanton *h = NULL;
    if (g2flow_instanton_new(m, 0.2, 0.5, 100.0, 1e-10, &h) != G2_STATUS_OK) return 12;
    G2Verdict k;
    double g_inf, lambda;
    if (g2flow_instanton_verdict(h, &k, &g_inf, &lambda) != G2_STATUS_OK) return 13;
    if (k != G2_VERDICT_COMPLETE_EXPONENTIAL) return 14;
    G2Metric *bad = NULL;
    if (g2flow_metric_new(-1.0, 0.01, 10.0, 1e-10, &bad) != G2_STATUS_INVALID_ARGUMENT) return 15;
    if (g2flow_last_error() == NULL) return 16;
    printf("ell %.10f G_inf %.6f lambda %.4f\n", ell, g_inf, lambda);
    g2flow_instanton_free(h);
    g2flow_metric_free(m);
    return 0;
}
