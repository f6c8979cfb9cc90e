/* cc smoke.c -I../include ../../../target/release/libloo_gp_ffi.a -lm -lpthread -ldl */
#include <stdio.h>
#include "loo_gp.h"

int main(void) {
    double x[] = {0.0, 0.2, 0.4, 0.6, 0.8, 1.0};
    double z[] = {0.1, 0.9, 1.2, 0.4, -0.6, -1.1};
    double rho[] = {0.3};
    LooGpDataset *data = NULL;
    LooGpParams *params = NULL;
    if (loo_gp_dataset_new(x, 6, 1, z, &data) != LOO_GP_STATUS_OK ||
        loo_gp_params_new(LOO_GP_KERNEL_MATERN52, 1.0, rho, 1, 0.01, false, &params) != LOO_GP_STATUS_OK) {
        fprintf(stderr, "%s\n", loo_gp_last_error_message());
        return 1;
    }
    double value, grad[2];
    LooGpStatus s = loo_gp_criterion_with_gradient(params, data, LOO_GP_RULE_CRPS, &value, grad, 2);
    if (s != LOO_GP_STATUS_OK) {
        fprintf(stderr, "error %d: %s\n", (int)s, loo_gp_last_error_message());
        return 1;
    }
    printf("crps %.6f grad (%.6f, %.6f)\n", value, grad[0], grad[1]);
    loo_gp_params_free(params);
    loo_gp_dataset_free(data);
    return 0;
}
