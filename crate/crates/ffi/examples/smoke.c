/* Minimal C client: advance a small run and print the energies. */
#include <stdio.h>
#include "chlab.h"

int main(void) {
    const char *config =
        "dim = 1\n"
        "n = 32\n"
        "eps_u = 0.05\n"
        "eps_v = 0.05\n"
        "sigma = 1\n"
        "c = 0.1\n"
        "tau = 1e-3\n";
    ChlabSimulation *sim = NULL;
    if (chlab_simulation_new(config, &sim) != CHLAB_STATUS_OK) {
        char msg[256];
        chlab_last_error_message(msg, sizeof msg);
        fprintf(stderr, "%s\n", msg);
        return 1;
    }
    uint64_t steps = 0;
    if (chlab_simulation_advance(sim, 0.05, &steps) != CHLAB_STATUS_OK) {
        chlab_simulation_free(sim);
        return 1;
    }
    ChlabEnergy e;
    double mu, mv;
    chlab_simulation_energy(sim, &e);
    chlab_simulation_means(sim, &mu, &mv);
    printf("steps=%llu psi_tilde=%.12g mean_u=%.12g mean_v=%.12g\n",
           (unsigned long long)steps, e.psi_tilde, mu, mv);

    ChlabSimulation *bad = NULL;
    int status = chlab_simulation_new("c = 2\n", &bad) == CHLAB_STATUS_CONFIG && bad == NULL;
    chlab_simulation_free(sim);
    return status ? 0 : 1;
}
