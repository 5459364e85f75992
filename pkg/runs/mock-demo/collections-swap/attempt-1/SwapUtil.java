public class SwapUtil {
    void swap(List<String> list, int i, int j) { java.util.Collections.swap(list, i, j); }
}
