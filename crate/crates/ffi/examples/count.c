#include <stdio.h>
#include "causal_nie.h"

int main(void) {
    char *count = NULL;
    if (cnie_count_dags(2, 3, &count) != CNIE_STATUS_OK) {
        fprintf(stderr, "%s\n", cnie_last_error_message());
        return 1;
    }
    printf("%s\n", count);
    cnie_string_free(count);
    return 0;
}
