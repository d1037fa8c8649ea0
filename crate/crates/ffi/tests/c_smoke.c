#include <stdio.h>
#include <string.h>
#include "skelalign.h"

static const char *DOC =
    "{\"people\":[{\"pose_keypoints_2d\":["
    "256,70,1,256,110,1,216,120,1,166,120,1,116,120,1,296,120,1,346,120,1,396,120,1,"
    "236,240,1,236,320,1,236,400,1,276,240,1,276,320,1,276,400,1,"
    "250,64,1,262,64,1,244,68,1,268,68,1]}]}";

int main(void) {
    SkelalignSkeleton *ref = NULL, *sub = NULL;
    SkelalignAlignment *al = NULL;
    SkelalignAlignConfig cfg = skelalign_align_config_default();
    SkelalignBuffer png = {0};
    SkelalignKeypoint p;
    SkelalignJointStatus st;

    if (skelalign_skeleton_from_openpose_json((const uint8_t *)DOC, strlen(DOC), 512, 512, 0, &ref) != SKELALIGN_STATUS_OK ||
        skelalign_skeleton_from_openpose_json((const uint8_t *)DOC, strlen(DOC), 512, 512, 0, &sub) != SKELALIGN_STATUS_OK) {
        fprintf(stderr, "parse: %s\n", skelalign_last_error());
        return 1;
    }
    cfg.subject_scale = 0.5;
    if (skelalign_retarget(ref, sub, &cfg, &al) != SKELALIGN_STATUS_OK) {
        fprintf(stderr, "retarget: %s\n", skelalign_last_error());
        return 1;
    }
    skelalign_alignment_joint(al, 4, &p, &st);
    if (skelalign_render_png(ref, 0, 0, 0, 0, &png) != SKELALIGN_STATUS_OK || png.len < 8) {
        fprintf(stderr, "render: %s\n", skelalign_last_error());
        return 1;
    }
    printf("%s %d %.3f %.3f %d\n", skelalign_version(), (int)st, p.x, skelalign_alignment_offset(al), png.data[1]);
    skelalign_buffer_free(&png);
    skelalign_alignment_free(al);
    skelalign_skeleton_free(ref);
    skelalign_skeleton_free(sub);
    return 0;
}
