import java.util.Arrays;

public class SliceWindow {
    public static void main(String[] args) {
        int[] values = {3, 1, 4, 1, 5, 9};
        int[] window = Arrays.copyOfRange(values, 2, 9);
        System.out.println("copy: " + Arrays.toString(window));
    }
}
