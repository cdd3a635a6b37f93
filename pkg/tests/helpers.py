from vlfusion.dataio import Source, make_detection


def det(t, box, cls=0, conf=0.9, source=Source.RGB):
    return make_detection(t, box, cls, conf, source)


def moving_box(frame, x0=100.0, y0=120.0, vx=3.0, vy=-1.0, w=40.0, h=80.0):
    x, y = x0 + vx * frame, y0 + vy * frame
    return (x, y, x + w, y + h)
