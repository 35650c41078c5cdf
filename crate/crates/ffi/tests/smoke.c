#include <math.h>
#include <stdio.h>
#include "mixkit.h"

int main(void) {
    double refs[8] = {1.0, 0.5, -0.25, 0.0, 0.0, -0.5, 1.0, 2.0};
    MixkitBatch *batch = NULL;
    MixkitSources *sources = NULL;
    size_t owners[2];
    double loss = 0.0;

    if (mixkit_batch_new(refs, 2, 4, 8000, &batch) != MIXKIT_STATUS_OK) return 1;
    if (mixkit_sources_new(refs, 2, 4, 8000, &sources) != MIXKIT_STATUS_OK) return 2;
    if (mixkit_mixit(batch, sources, 30.0, MIXKIT_SEARCH_EFFICIENT, 1u << 15, owners, 2, &loss) != MIXKIT_STATUS_OK)
        return 3;
    if (owners[0] != 0 || owners[1] != 1 || fabs(loss + 60.0) > 1e-9) return 4;
    if (mixkit_covariance_loss(NULL, &loss) != MIXKIT_STATUS_NULL_POINTER) return 5;
    if (mixkit_last_error_length() == 0) return 6;
    mixkit_sources_free(sources);
    mixkit_batch_free(batch);
    printf("ok %s\n", mixkit_version());
    return 0;
}
