#include <math.h>
#include <stdio.h>
#include "wavelet_gp.h"

int main(void) {
    size_t src[] = {0, 1, 2, 3}, dst[] = {1, 2, 3, 0};
    WggpGraph *g = NULL;
    if (wggp_graph_new(4, src, dst, NULL, 4, &g) != WGGP_STATUS_OK) {
        return 1;
    }
    double ev[4];
    if (wggp_graph_eigenvalues(g, ev, 4) != WGGP_STATUS_OK) {
        return 2;
    }
    double beta = 1.0;
    WggpFilter f = {WGGP_MOTHER_MEXICAN_HAT, true, 2.0, &beta, 1};
    double signal[4] = {1, 0, 0, 0}, out[4];
    if (wggp_graph_apply_filter(g, &f, WGGP_MODE_EXACT, 0, signal, out, 4) != WGGP_STATUS_OK) {
        return 3;
    }
    WggpStatus s = wggp_graph_eigenvalues(g, ev, 3);
    char msg[128];
    wggp_last_error_message(msg, sizeof msg);
    wggp_graph_free(g);
    printf("%.6f %.6f %d %s\n", ev[0], ev[3], (int)s, msg);
    return fabs(ev[3] - 2.0) < 1e-9 ? 0 : 4;
}
