public class EllipseMath {
    double ellipseArea(Ellipse2D e) { return Math.PI * e.getWidth() * e.getHeight() / 4; }
}
